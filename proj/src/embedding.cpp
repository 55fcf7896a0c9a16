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

#include "dlrm/embedding.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <unordered_map>

#include "dlrm/error.hpp"

namespace dlrm {

SparseBatch SparseBatch::from_lookups(
    const std::vector<std::vector<RowIndex>>& lookups) {
  SparseBatch batch;
  batch.offsets.reserve(lookups.size() + 1);
  for (const auto& lookup : lookups) {
    batch.indices.insert(batch.indices.end(), lookup.begin(), lookup.end());
    batch.offsets.push_back(static_cast<std::int64_t>(batch.indices.size()));
  }
  return batch;
}

std::vector<std::int64_t> SparseBatch::lengths() const {
  return lengths_from_offsets(offsets);
}

SparseBatch SparseBatch::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > batch_size()) {
    throw Error(ErrorCode::kOutOfRange, "sparse batch slice out of range");
  }
  SparseBatch out;
  const auto first = offsets[begin];
  const auto last = offsets[end];
  out.offsets.clear();
  for (std::size_t j = begin; j <= end; ++j) out.offsets.push_back(offsets[j] - first);
  out.indices.assign(indices.begin() + first, indices.begin() + last);
  if (per_index_weights) {
    out.per_index_weights.emplace(per_index_weights->begin() + first,
                                  per_index_weights->begin() + last);
  }
  return out;
}

void SparseBatch::validate(std::size_t num_rows, std::size_t table_id) const {
  const std::string where = "table " + std::to_string(table_id);
  if (offsets.empty() || offsets.front() != 0) {
    throw Error(ErrorCode::kInvalidArgument, where + ": offsets must start at 0");
  }
  for (std::size_t j = 1; j < offsets.size(); ++j) {
    if (offsets[j] < offsets[j - 1]) {
      throw Error(ErrorCode::kInvalidArgument,
                  where + ": offsets decrease at position " + std::to_string(j));
    }
  }
  if (static_cast<std::size_t>(offsets.back()) != indices.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                where + ": final offset " + std::to_string(offsets.back()) +
                    " != number of indices " + std::to_string(indices.size()));
  }
  if (per_index_weights && per_index_weights->size() != indices.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                where + ": per_index_weights length " +
                    std::to_string(per_index_weights->size()) +
                    " != number of indices " + std::to_string(indices.size()));
  }
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] < 0 || static_cast<std::size_t>(indices[k]) >= num_rows) {
      throw Error(ErrorCode::kOutOfRange,
                  where + ": index " + std::to_string(indices[k]) +
                      " at position " + std::to_string(k) +
                      " outside [0, " + std::to_string(num_rows) + ")");
    }
  }
}

std::vector<std::int64_t> offsets_from_lengths(std::span<const std::int64_t> lengths) {
  std::vector<std::int64_t> offsets(lengths.size() + 1, 0);
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] < 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "negative length at position " + std::to_string(i));
    }
    offsets[i + 1] = offsets[i] + lengths[i];
  }
  return offsets;
}

std::vector<std::int64_t> lengths_from_offsets(std::span<const std::int64_t> offsets) {
  std::vector<std::int64_t> lengths;
  if (offsets.empty()) return lengths;
  lengths.reserve(offsets.size() - 1);
  for (std::size_t i = 1; i < offsets.size(); ++i) {
    lengths.push_back(offsets[i] - offsets[i - 1]);
  }
  return lengths;
}

EmbeddingTable::EmbeddingTable(std::size_t num_rows, std::size_t dim)
    : weights_(num_rows, dim) {}

EmbeddingTable::EmbeddingTable(Matrix weights) : weights_(std::move(weights)) {}

Matrix lookup_batch(const EmbeddingTable& table, const SparseBatch& batch,
                    std::size_t table_id) {
  batch.validate(table.num_rows(), table_id);
  const std::size_t d = table.dim();
  Matrix out(batch.batch_size(), d);
  const Matrix& w = table.weights();
  for (std::size_t j = 0; j < batch.batch_size(); ++j) {
    auto dst = out.row(j);
    for (auto k = batch.offsets[j]; k < batch.offsets[j + 1]; ++k) {
      const auto src = w.row(static_cast<std::size_t>(batch.indices[k]));
      if (batch.per_index_weights) {
        const double a = (*batch.per_index_weights)[k];
        for (std::size_t c = 0; c < d; ++c) dst[c] += src[c] * a;
      } else {
        for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
      }
    }
  }
  return out;
}

SparseRowGrad lookup_backward(const EmbeddingTable& table,
                              const SparseBatch& batch, const Matrix& grad_out) {
  const std::size_t d = table.dim();
  if (grad_out.rows() != batch.batch_size() || grad_out.cols() != d) {
    throw Error(ErrorCode::kDimensionMismatch,
                "lookup_backward: grad_out is " + grad_out.shape_string() +
                    ", expected " + std::to_string(batch.batch_size()) + "x" +
                    std::to_string(d));
  }
  batch.validate(table.num_rows());

  // Rows get slots in first-touch order; each slot accumulates in ascending
  // (sample, position) order.
  std::unordered_map<RowIndex, std::size_t> slot_of;
  std::vector<RowIndex> touched;
  std::vector<double> acc;
  for (std::size_t j = 0; j < batch.batch_size(); ++j) {
    const auto g = grad_out.row(j);
    for (auto k = batch.offsets[j]; k < batch.offsets[j + 1]; ++k) {
      const RowIndex r = batch.indices[k];
      auto [it, inserted] = slot_of.try_emplace(r, touched.size());
      if (inserted) {
        touched.push_back(r);
        acc.resize(acc.size() + d, 0.0);
      }
      double* dst = acc.data() + it->second * d;
      if (batch.per_index_weights) {
        const double a = (*batch.per_index_weights)[k];
        for (std::size_t c = 0; c < d; ++c) dst[c] += g[c] * a;
      } else {
        for (std::size_t c = 0; c < d; ++c) dst[c] += g[c];
      }
    }
  }

  std::vector<std::size_t> order(touched.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return touched[a] < touched[b]; });
  SparseRowGrad out;
  out.rows.reserve(touched.size());
  out.values = Matrix(touched.size(), d);
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.rows.push_back(touched[order[i]]);
    std::copy_n(acc.data() + order[i] * d, d, out.values.row(i).data());
  }
  return out;
}

Matrix densify(const SparseRowGrad& grad, std::size_t num_rows) {
  Matrix dense(num_rows, grad.values.cols());
  for (std::size_t i = 0; i < grad.rows.size(); ++i) {
    const auto r = static_cast<std::size_t>(grad.rows[i]);
    std::copy_n(grad.values.row(i).data(), grad.values.cols(), dense.row(r).data());
  }
  return dense;
}

}  // namespace dlrm
