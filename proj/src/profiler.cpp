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

#include "dlrm/profiler.hpp"

namespace dlrm {

std::string_view to_string(OpCategory category) {
  switch (category) {
    case OpCategory::kDataGeneration: return "data_generation";
    case OpCategory::kEmbeddingLookup: return "embedding_lookup";
    case OpCategory::kBottomMlp: return "bottom_mlp";
    case OpCategory::kInteraction: return "interaction";
    case OpCategory::kTopMlp: return "top_mlp";
    case OpCategory::kLoss: return "loss";
    case OpCategory::kOptimizer: return "optimizer";
    case OpCategory::kShuffle: return "shuffle";
    case OpCategory::kAllreduce: return "allreduce";
  }
  return "unknown";
}

double OpProfiler::total() const {
  double sum = 0.0;
  for (double s : seconds_) sum += s;
  return sum;
}

}  // namespace dlrm
