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

// Embedding tables and pooled lookups in the offsets/indices (CSR) format.

#ifndef DLRM_EMBEDDING_HPP_
#define DLRM_EMBEDDING_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dlrm/dense.hpp"

namespace dlrm {

using RowIndex = std::int64_t;

// A mini-batch of multi-hot lookups against one table. Segment j covers
// indices[offsets[j] .. offsets[j+1]); offsets always carries the terminal
// entry, so a batch of t lookups has t + 1 offsets. Indices are 0-based.
struct SparseBatch {
  std::vector<std::int64_t> offsets{0};
  std::vector<RowIndex> indices;
  // Per-index multipliers (the nonzeros of a multi-hot column). Absent means
  // every weight is 1.
  std::optional<std::vector<double>> per_index_weights;

  std::size_t batch_size() const { return offsets.empty() ? 0 : offsets.size() - 1; }

  // Builds a batch from one index list per sample.
  static SparseBatch from_lookups(const std::vector<std::vector<RowIndex>>& lookups);

  std::vector<std::int64_t> lengths() const;

  // Samples [begin, end) with offsets rebased to zero.
  SparseBatch slice(std::size_t begin, std::size_t end) const;

  // Structural checks plus index bounds against a table with `num_rows` rows.
  // `table_id` is only used to label the error.
  void validate(std::size_t num_rows, std::size_t table_id = 0) const;

  bool operator==(const SparseBatch&) const = default;
};

std::vector<std::int64_t> offsets_from_lengths(std::span<const std::int64_t> lengths);
std::vector<std::int64_t> lengths_from_offsets(std::span<const std::int64_t> offsets);

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::size_t num_rows, std::size_t dim);
  explicit EmbeddingTable(Matrix weights);

  std::size_t num_rows() const noexcept { return weights_.rows(); }
  std::size_t dim() const noexcept { return weights_.cols(); }

  const Matrix& weights() const noexcept { return weights_; }
  Matrix& weights() noexcept { return weights_; }

  bool operator==(const EmbeddingTable&) const = default;

 private:
  Matrix weights_;
};

// Coalesced sparse gradient of one table: rows ascending and unique,
// values.row(i) is the gradient of row rows[i].
struct SparseRowGrad {
  std::vector<RowIndex> rows;
  Matrix values;

  bool operator==(const SparseRowGrad&) const = default;
};

// Pooled sum lookup: output row j is the (weighted) sum of the table rows in
// segment j, accumulated in ascending position. Empty segments give zeros.
Matrix lookup_batch(const EmbeddingTable& table, const SparseBatch& batch,
                    std::size_t table_id = 0);

// Adjoint of lookup_batch with respect to the table.
SparseRowGrad lookup_backward(const EmbeddingTable& table,
                              const SparseBatch& batch, const Matrix& grad_out);

// Dense m x d form of a sparse gradient, for tests and small tables.
Matrix densify(const SparseRowGrad& grad, std::size_t num_rows);

}  // namespace dlrm

#endif  // DLRM_EMBEDDING_HPP_
