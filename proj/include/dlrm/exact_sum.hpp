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

// Exact floating-point accumulation.
//
// ExactSum holds the exact (unrounded) sum of any number of doubles as a
// fixed-point integer spanning the whole double exponent range, and rounds
// once, to nearest-even, when the value is read. Because no intermediate
// rounding happens, merging partial sums is associative: any partition of a
// batch into shards yields the same bits. The data-parallel simulation relies
// on this to reproduce serial gradients exactly.

#ifndef DLRM_EXACT_SUM_HPP_
#define DLRM_EXACT_SUM_HPP_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dlrm/dense.hpp"

namespace dlrm {

class ExactSum {
 public:
  ExactSum() = default;

  void add(double v);
  void merge(const ExactSum& other);

  // Correctly rounded value of the exact sum. Infinities and NaNs among the
  // inputs propagate with ordinary IEEE semantics.
  double value() const;

  // Approximate bytes needed to ship this accumulator between devices.
  std::size_t wire_bytes() const;

 private:
  void reserve_limbs(int lo, int hi);
  void normalize();

  // Value is sum over i of limbs_[i] * 2^(32 * (base_ + i) - 1074). Every
  // limb absorbs at most one 32-bit chunk per add, so int64 storage tolerates
  // 2^30 adds between carry propagations.
  int base_ = 0;
  std::vector<std::int64_t> limbs_;
  std::uint32_t pending_ = 0;
  double special_ = 0.0;
  bool has_special_ = false;
};

// Elementwise exact sums laid out like a Matrix.
class ExactMatrix {
 public:
  ExactMatrix() = default;
  ExactMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), cells_(rows * cols) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  ExactSum& operator()(std::size_t r, std::size_t c) {
    return cells_[r * cols_ + c];
  }
  const ExactSum& operator()(std::size_t r, std::size_t c) const {
    return cells_[r * cols_ + c];
  }

  void merge(const ExactMatrix& other);
  Matrix rounded() const;
  std::size_t wire_bytes() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<ExactSum> cells_;
};

// Exact a^T * b: the contraction over rows is carried out without rounding.
ExactMatrix matmul_tn_exact(const Matrix& a, const Matrix& b);

// Exact column sums as a 1 x cols accumulator row.
ExactMatrix column_sums_exact(const Matrix& a);

}  // namespace dlrm

#endif  // DLRM_EXACT_SUM_HPP_
