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

// Stack-distance profiling and synthesis of embedding access traces.
//
// A trace is profiled into the list of unique accesses (in first-touch order)
// and the distribution of LRU stack distances, where distance 0 marks a first
// touch and distance d > 0 means the accessed id sat at depth d of the
// recency stack (depth 1 = most recent). A synthetic trace is regenerated by
// sampling distances from that distribution.

#ifndef DLRM_TRACE_HPP_
#define DLRM_TRACE_HPP_

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dlrm/dense.hpp"

namespace dlrm {

using AccessId = std::int64_t;

struct TraceProfile {
  std::vector<AccessId> unique_accesses;
  std::map<std::size_t, double> distances;  // stack distance -> probability

  double probability(std::size_t d) const {
    auto it = distances.find(d);
    return it == distances.end() ? 0.0 : it->second;
  }
  // Throws kInvalidArgument if the distribution is negative, not normalized
  // (1e-12) or references a depth beyond the number of unique accesses.
  void validate() const;

  bool operator==(const TraceProfile&) const = default;
};

TraceProfile profile_trace(std::span<const AccessId> trace);

// Stack distance of every access, 0 for first touches.
std::vector<std::size_t> stack_distances(std::span<const AccessId> trace);

// Samples `length` ids. At each step the distance is drawn from the profile
// restricted to {0..s}, s being the number of uniques emitted so far; once
// every unique has been emitted, 0 leaves the support.
std::vector<AccessId> generate_trace(const TraceProfile& profile,
                                     std::size_t length, RngStream& stream);

// Raises the first-touch probability to at least `min_first_touch`, rescaling
// the remaining mass to keep the distribution normalized.
TraceProfile adjust_distribution(const TraceProfile& profile, double min_first_touch);

// Expected number of steps generate_trace spends before every unique has
// been emitted, when sampling from adjust_distribution(profile, threshold).
// Until then the support is cut at the number of uniques seen so far.
double expected_warmup_steps(const TraceProfile& profile, double min_first_touch);

// Share of a synthetic trace the default threshold allows for the warmup.
inline constexpr double kWarmupFraction = 0.05;

// Smallest threshold, no lower than |u| / target_length, whose expected
// warmup fits in kWarmupFraction of the target length (1 if none does).
double default_first_touch_threshold(const TraceProfile& profile,
                                     std::size_t target_length);

// Hit rate of an LRU cache holding `capacity` ids.
double lru_hit_rate(std::span<const AccessId> trace, std::size_t capacity);

// Sum over d of |p(d) - q(d)| / 2.
double total_variation(const TraceProfile& a, const TraceProfile& b);

// Text format: the first line lists the unique ids separated by spaces; each
// following line is "distance probability" with the probability printed with
// 17 significant digits so that it parses back to the same double.
void write_profile(std::ostream& out, const TraceProfile& profile);
TraceProfile read_profile(std::istream& in);
void save_profile(const std::string& path, const TraceProfile& profile);
TraceProfile load_profile(const std::string& path);

}  // namespace dlrm

#endif  // DLRM_TRACE_HPP_
