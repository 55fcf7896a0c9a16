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

// Input pipelines: random dense/sparse mini-batches, trace-driven synthetic
// sparse batches, and the Criteo click-log text format.

#ifndef DLRM_DATAGEN_HPP_
#define DLRM_DATAGEN_HPP_

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dlrm/dense.hpp"
#include "dlrm/embedding.hpp"
#include "dlrm/model.hpp"
#include "dlrm/trace.hpp"

namespace dlrm {

enum class DenseDistribution { kUniform, kNormal };

struct SparseFeatureSpec {
  std::size_t num_rows = 1;  // m
  std::size_t max_indices = 1;  // k
  bool fixed = true;  // exactly k per lookup, else uniform in [1, k]
};

struct RandomDataSpec {
  std::size_t batch_size = 1;
  std::size_t dense_dim = 1;
  DenseDistribution distribution = DenseDistribution::kUniform;
  std::vector<SparseFeatureSpec> tables;
  std::uint64_t seed = 0;

  void validate() const;
};

Matrix gen_dense_batch(const RandomDataSpec& spec, RngStream& stream);
SparseBatch gen_sparse_batch(const RandomDataSpec& spec, std::size_t table_index,
                             RngStream& stream);

// One training mini-batch. Labels are 0/1.
struct Batch {
  Matrix dense;
  std::vector<SparseBatch> sparse;
  std::vector<double> labels;

  std::size_t size() const { return dense.rows(); }
  Batch slice(std::size_t begin, std::size_t end) const;
};

// Source of mini-batches. next() returns nullopt when exhausted.
class BatchSource {
 public:
  virtual ~BatchSource() = default;
  virtual std::optional<Batch> next() = 0;
  // Rewinds to the first batch; used between epochs.
  virtual void reset() = 0;
};

// Labels for generated data come from a frozen teacher DLRM with the same
// architecture as the model being trained: y ~ Bernoulli(sigmoid(scale *
// teacher_logit)). The scale sharpens the teacher so its labels carry signal.
struct TeacherSpec {
  std::uint64_t seed = 0;
  double logit_scale = 16.0;
};

// Uniform-random sparse indices; `num_batches` batches from a fixed seed.
// Without a teacher, labels are fair coin flips.
std::unique_ptr<BatchSource> make_random_source(const DlrmConfig& config,
                                                const RandomDataSpec& spec,
                                                std::size_t num_batches,
                                                const std::optional<TeacherSpec>& teacher);

// Sparse indices replayed from synthetic traces, one per table, each
// generated from that table's profile.
std::unique_ptr<BatchSource> make_synthetic_source(const DlrmConfig& config,
                                                   const RandomDataSpec& spec,
                                                   std::vector<TraceProfile> profiles,
                                                   std::size_t num_batches,
                                                   const std::optional<TeacherSpec>& teacher);

// Profile of a bootstrap trace of uniform draws, used when no profile is
// supplied for synthetic generation.
TraceProfile bootstrap_profile(const SparseFeatureSpec& table, std::size_t length,
                               RngStream& stream);

// ---------------------------------------------------------------------------
// Criteo

inline constexpr std::size_t kCriteoDense = 13;
inline constexpr std::size_t kCriteoCategorical = 26;

struct CriteoSample {
  double label = 0.0;
  std::vector<double> dense;     // 13, log-transformed
  std::vector<RowIndex> categorical;  // 26
};

// FNV-1a, 64-bit.
std::uint64_t hash_token(std::string_view token);

// Parses "label \t I1..I13 \t C1..C26". Dense values become ln(1 + max(x, 0))
// with missing fields as 0; categorical tokens hash modulo the vocabulary
// size of their column, missing ones map to 0. `line_no` labels errors.
CriteoSample parse_criteo(std::string_view line,
                          const std::vector<std::size_t>& vocab_sizes,
                          std::size_t line_no = 0);

// Streams a Criteo file as batches of `batch_size` (the last may be short).
std::unique_ptr<BatchSource> make_criteo_source(const std::string& path,
                                                std::vector<std::size_t> vocab_sizes,
                                                std::size_t batch_size,
                                                std::size_t max_batches);

}  // namespace dlrm

#endif  // DLRM_DATAGEN_HPP_
