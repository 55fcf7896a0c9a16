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

#include "dlrm/trace.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <list>
#include <sstream>
#include <unordered_map>

#include "dlrm/error.hpp"

namespace dlrm {

namespace {

// Binary indexed tree over time slots; a slot holds 1 while the id accessed
// at that time is still at its most recent position in the LRU stack. The
// stack depth of an element is the number of live slots at or after its own.
class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : tree_(n + 1, 0) {}

  void add(std::size_t i, int delta) {
    for (++i; i < tree_.size(); i += i & (~i + 1)) tree_[i] += delta;
  }
  // Live slots in [0, i).
  std::size_t prefix(std::size_t i) const {
    long long s = 0;
    for (; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return static_cast<std::size_t>(s);
  }
  // Slot holding the k-th live entry (1-based) in time order.
  std::size_t kth(std::size_t k) const {
    std::size_t pos = 0;
    std::size_t step = std::bit_floor(tree_.size() - 1);
    long long remaining = static_cast<long long>(k);
    for (; step > 0; step >>= 1) {
      const std::size_t next = pos + step;
      if (next < tree_.size() && tree_[next] < remaining) {
        pos = next;
        remaining -= tree_[next];
      }
    }
    return pos;  // 0-based slot
  }

 private:
  std::vector<long long> tree_;
};

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

void TraceProfile::validate() const {
  double total = 0.0;
  for (const auto& [d, p] : distances) {
    if (!(p >= 0.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "trace profile: negative probability at distance " + std::to_string(d));
    }
    if (d > unique_accesses.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "trace profile: distance " + std::to_string(d) + " exceeds " +
                      std::to_string(unique_accesses.size()) + " unique accesses");
    }
    total += p;
  }
  if (!distances.empty() && std::abs(total - 1.0) > 1e-12) {
    throw Error(ErrorCode::kInvalidArgument,
                "trace profile: probabilities sum to " + format_double(total));
  }
}

std::vector<std::size_t> stack_distances(std::span<const AccessId> trace) {
  std::vector<std::size_t> out(trace.size());
  Fenwick live(trace.size());
  std::unordered_map<AccessId, std::size_t> last_seen;
  std::size_t stack_size = 0;
  for (std::size_t t = 0; t < trace.size(); ++t) {
    auto [it, first_touch] = last_seen.try_emplace(trace[t], t);
    if (first_touch) {
      out[t] = 0;
      ++stack_size;
    } else {
      const std::size_t prev = it->second;
      out[t] = stack_size - live.prefix(prev);
      live.add(prev, -1);
      it->second = t;
    }
    live.add(t, +1);
  }
  return out;
}

TraceProfile profile_trace(std::span<const AccessId> trace) {
  TraceProfile profile;
  if (trace.empty()) return profile;
  const auto distances = stack_distances(trace);
  std::map<std::size_t, std::size_t> counts;
  for (std::size_t t = 0; t < trace.size(); ++t) {
    if (distances[t] == 0) profile.unique_accesses.push_back(trace[t]);
    ++counts[distances[t]];
  }
  const double n = static_cast<double>(trace.size());
  for (const auto& [d, c] : counts) profile.distances[d] = static_cast<double>(c) / n;
  return profile;
}

std::vector<AccessId> generate_trace(const TraceProfile& profile,
                                     std::size_t length, RngStream& stream) {
  std::vector<AccessId> out;
  if (length == 0) return out;
  const auto& uniques = profile.unique_accesses;
  if (uniques.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "generate_trace: cannot emit " + std::to_string(length) +
                    " accesses from a profile without unique accesses");
  }
  const std::size_t max_d = profile.distances.empty() ? 0 : profile.distances.rbegin()->first;
  std::vector<double> cumulative(max_d + 1, 0.0);
  for (std::size_t d = 0; d <= max_d; ++d) {
    cumulative[d] = (d ? cumulative[d - 1] : 0.0) + profile.probability(d);
  }

  out.reserve(length);
  Fenwick live(length);
  std::size_t seen = 0;
  std::size_t next_unique = 0;
  for (std::size_t i = 0; i < length; ++i) {
    const bool exhausted = next_unique == uniques.size();
    std::size_t d = 0;
    if (seen > 0) {
      const std::size_t hi = std::min(seen, max_d);
      const std::size_t lo = exhausted ? 1 : 0;
      const double floor_mass = lo ? cumulative[0] : 0.0;
      const double mass = (hi >= lo ? cumulative[hi] : floor_mass) - floor_mass;
      if (mass > 0.0) {
        const double r = floor_mass + stream.uniform() * mass;
        const auto first = cumulative.begin() + static_cast<std::ptrdiff_t>(lo);
        const auto last = cumulative.begin() + static_cast<std::ptrdiff_t>(hi) + 1;
        const auto it = std::upper_bound(first, last, r);
        d = it == last ? hi : static_cast<std::size_t>(it - cumulative.begin());
      } else {
        // No admissible mass: take a new unique if any remain, otherwise
        // cycle through the stack from its least recent end.
        d = exhausted ? seen : 0;
      }
    }
    AccessId a;
    if (d == 0) {
      a = uniques[next_unique++];
      ++seen;
    } else {
      const std::size_t slot = live.kth(seen - d + 1);
      a = out[slot];
      live.add(slot, -1);
    }
    live.add(i, +1);
    out.push_back(a);
  }
  return out;
}

TraceProfile adjust_distribution(const TraceProfile& profile, double min_first_touch) {
  if (!(min_first_touch >= 0.0 && min_first_touch <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "adjust_distribution: threshold " + format_double(min_first_touch) +
                    " outside [0, 1]");
  }
  const double p0 = profile.probability(0);
  if (min_first_touch <= p0) return profile;
  const double rest = 1.0 - p0;
  if (rest <= 0.0) return profile;
  TraceProfile out = profile;
  const double scale = (1.0 - min_first_touch) / rest;
  for (auto& [d, p] : out.distances) {
    if (d > 0) p *= scale;
  }
  out.distances[0] = min_first_touch;
  return out;
}

double expected_warmup_steps(const TraceProfile& profile, double min_first_touch) {
  const TraceProfile q = adjust_distribution(profile, min_first_touch);
  const std::size_t uniques = q.unique_accesses.size();
  const double q0 = q.probability(0);
  if (uniques == 0) return 0.0;
  if (q0 <= 0.0) return std::numeric_limits<double>::infinity();
  // With s uniques emitted a step is a first touch with probability
  // q0 / (q0 + sum_{1 <= d <= s} q_d); the wait is geometric.
  double steps = 0.0;
  double reuse = 0.0;
  auto it = q.distances.upper_bound(0);
  for (std::size_t s = 0; s < uniques; ++s) {
    for (; it != q.distances.end() && it->first <= s; ++it) reuse += it->second;
    steps += (q0 + reuse) / q0;
  }
  return steps;
}

double default_first_touch_threshold(const TraceProfile& profile,
                                     std::size_t target_length) {
  if (target_length == 0) return 0.0;
  const double floor = std::min(1.0, static_cast<double>(profile.unique_accesses.size()) /
                                         static_cast<double>(target_length));
  const double budget = kWarmupFraction * static_cast<double>(target_length);
  if (expected_warmup_steps(profile, floor) <= budget) return floor;
  if (expected_warmup_steps(profile, 1.0) > budget) return 1.0;
  // The warmup shrinks monotonically as the threshold grows.
  double lo = floor;
  double hi = 1.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (expected_warmup_steps(profile, mid) <= budget ? hi : lo) = mid;
  }
  return hi;
}

double lru_hit_rate(std::span<const AccessId> trace, std::size_t capacity) {
  if (trace.empty() || capacity == 0) return 0.0;
  std::list<AccessId> recency;  // front = most recent
  std::unordered_map<AccessId, std::list<AccessId>::iterator> where;
  std::size_t hits = 0;
  for (AccessId a : trace) {
    auto it = where.find(a);
    if (it != where.end()) {
      ++hits;
      recency.splice(recency.begin(), recency, it->second);
      continue;
    }
    if (recency.size() == capacity) {
      where.erase(recency.back());
      recency.pop_back();
    }
    recency.push_front(a);
    where[a] = recency.begin();
  }
  return static_cast<double>(hits) / static_cast<double>(trace.size());
}

double total_variation(const TraceProfile& a, const TraceProfile& b) {
  double sum = 0.0;
  for (const auto& [d, p] : a.distances) sum += std::abs(p - b.probability(d));
  for (const auto& [d, q] : b.distances) {
    if (!a.distances.contains(d)) sum += q;
  }
  return 0.5 * sum;
}

void write_profile(std::ostream& out, const TraceProfile& profile) {
  for (std::size_t i = 0; i < profile.unique_accesses.size(); ++i) {
    if (i) out << ' ';
    out << profile.unique_accesses[i];
  }
  out << '\n';
  for (const auto& [d, p] : profile.distances) out << d << ' ' << format_double(p) << '\n';
}

TraceProfile read_profile(std::istream& in) {
  TraceProfile profile;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::kParse,
                "trace profile line " + std::to_string(line_no) + ": " + what);
  };
  if (!std::getline(in, line)) fail("missing unique-access line");
  ++line_no;
  {
    std::istringstream ids(line);
    std::string tok;
    while (ids >> tok) {
      AccessId id{};
      const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), id);
      if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) fail("bad id '" + tok + "'");
      profile.unique_accesses.push_back(id);
    }
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string dtok, ptok, extra;
    if (!(fields >> dtok >> ptok) || (fields >> extra)) fail("expected 'distance probability'");
    std::size_t d{};
    double p{};
    auto r1 = std::from_chars(dtok.data(), dtok.data() + dtok.size(), d);
    auto r2 = std::from_chars(ptok.data(), ptok.data() + ptok.size(), p);
    if (r1.ec != std::errc{} || r1.ptr != dtok.data() + dtok.size()) fail("bad distance '" + dtok + "'");
    if (r2.ec != std::errc{} || r2.ptr != ptok.data() + ptok.size()) fail("bad probability '" + ptok + "'");
    if (!profile.distances.emplace(d, p).second) fail("duplicate distance " + dtok);
  }
  profile.validate();
  return profile;
}

void save_profile(const std::string& path, const TraceProfile& profile) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  write_profile(out, profile);
  if (!out) throw Error(ErrorCode::kIo, "failed writing '" + path + "'");
}

TraceProfile load_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  try {
    return read_profile(in);
  } catch (const Error& e) {
    rethrow_with_context(e, path);
  }
}

}  // namespace dlrm
