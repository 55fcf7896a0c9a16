/* Copyright 2026 The DLRM Kernels Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef DLRM_TRAIN_HPP_
#define DLRM_TRAIN_HPP_

#include "dlrm/datagen.hpp"
#include "dlrm/model.hpp"
#include "dlrm/optim.hpp"
#include "dlrm/profiler.hpp"

namespace dlrm {

struct StepResult {
  double loss = 0.0;
  double accuracy = 0.0;

  bool operator==(const StepResult&) const = default;
};

// Forward, loss, backward and optimizer update on one mini-batch.
StepResult train_step(DlrmModel& model, Optimizer& optimizer, const Batch& batch,
                      Reduction reduction = Reduction::kOrdered,
                      OpProfiler* profiler = nullptr);

// Loss and accuracy without updating the model.
StepResult evaluate(const DlrmModel& model, const Batch& batch,
                    OpProfiler* profiler = nullptr);

}  // namespace dlrm

#endif  // DLRM_TRAIN_HPP_
