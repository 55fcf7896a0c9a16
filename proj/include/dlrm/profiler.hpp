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

#ifndef DLRM_PROFILER_HPP_
#define DLRM_PROFILER_HPP_

#include <array>
#include <chrono>
#include <cstddef>
#include <string_view>

namespace dlrm {

// Operator classes timed by the benchmark. Forward and backward work of an
// operator are charged to the same class.
enum class OpCategory {
  kDataGeneration,
  kEmbeddingLookup,
  kBottomMlp,
  kInteraction,
  kTopMlp,
  kLoss,
  kOptimizer,
  kShuffle,
  kAllreduce,
};

inline constexpr std::size_t kNumOpCategories = 9;

std::string_view to_string(OpCategory category);

class OpProfiler {
 public:
  void add(OpCategory category, double seconds) {
    seconds_[static_cast<std::size_t>(category)] += seconds;
  }
  double seconds(OpCategory category) const {
    return seconds_[static_cast<std::size_t>(category)];
  }
  double total() const;

 private:
  std::array<double, kNumOpCategories> seconds_{};
};

// Charges its lifetime to `category`. A null profiler disables timing.
class ScopedOp {
 public:
  ScopedOp(OpProfiler* profiler, OpCategory category)
      : profiler_(profiler), category_(category) {
    if (profiler_) start_ = std::chrono::steady_clock::now();
  }
  ~ScopedOp() {
    if (profiler_) {
      const std::chrono::duration<double> dt =
          std::chrono::steady_clock::now() - start_;
      profiler_->add(category_, dt.count());
    }
  }
  ScopedOp(const ScopedOp&) = delete;
  ScopedOp& operator=(const ScopedOp&) = delete;

 private:
  OpProfiler* profiler_;
  OpCategory category_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace dlrm

#endif  // DLRM_PROFILER_HPP_
