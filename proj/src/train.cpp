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

#include "dlrm/train.hpp"

namespace dlrm {

StepResult train_step(DlrmModel& model, Optimizer& optimizer, const Batch& batch,
                      Reduction reduction, OpProfiler* profiler) {
  DlrmOutput fwd = dlrm_forward(model, batch.dense, batch.sparse, profiler);
  LossResult loss;
  StepResult result;
  {
    ScopedOp op(profiler, OpCategory::kLoss);
    loss = bce_loss(fwd.probs, batch.labels, reduction);
    result = {loss.loss, accuracy(fwd.probs, batch.labels)};
  }
  const DlrmGradients grads =
      dlrm_backward(model, fwd.cache, batch.sparse, loss.grad_logits, reduction, profiler);
  ScopedOp op(profiler, OpCategory::kOptimizer);
  optimizer.apply(model, grads);
  return result;
}

StepResult evaluate(const DlrmModel& model, const Batch& batch, OpProfiler* profiler) {
  const DlrmOutput fwd = dlrm_forward(model, batch.dense, batch.sparse, profiler);
  ScopedOp op(profiler, OpCategory::kLoss);
  return {bce_loss(fwd.probs, batch.labels).loss, accuracy(fwd.probs, batch.labels)};
}

}  // namespace dlrm
