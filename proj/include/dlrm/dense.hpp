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

// Dense numeric kernels shared by every other module.
//
// All reductions sum in ascending index order. This is part of the contract:
// matmul, dot and the MLP kernels must agree bit-for-bit with the naive
// triple-loop formulation so that tests can compare against scalar oracles
// and so that parallel execution reproduces serial results.

#ifndef DLRM_DENSE_HPP_
#define DLRM_DENSE_HPP_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace dlrm {

// Row-major rows x cols array of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(
      std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  // Rows [begin, end) as a new matrix.
  Matrix slice_rows(std::size_t begin, std::size_t end) const;

  std::string shape_string() const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix transpose(const Matrix& a);

// a * b. Throws kDimensionMismatch naming both shapes.
Matrix matmul(const Matrix& a, const Matrix& b);

// a * b^T, the affine-layer product x W^T.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

// a^T * b; the contraction runs over rows (samples) in ascending order.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

// Column sums, ascending row order, as a 1 x cols matrix.
Matrix column_sums(const Matrix& a);

double dot(std::span<const double> u, std::span<const double> v);

double max_abs_diff(const Matrix& a, const Matrix& b);

enum class Activation { kIdentity, kRelu, kSigmoid };

std::string to_string(Activation kind);

double sigmoid(double x);
double activate(double x, Activation kind);
// Derivative evaluated at the pre-activation x.
double activate_grad(double x, Activation kind);

Matrix activation(const Matrix& x, Activation kind);
Matrix activation_grad(const Matrix& x, Activation kind);

// Seedable stream over std::mt19937_64. The engine's output sequence is fixed
// by the C++ standard; the real-valued transforms below are written out here
// rather than taken from <random> distributions, whose algorithms are
// implementation-defined. Together this makes streams reproducible across
// compilers and platforms.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // [0, 1) with 53 random bits.
  double uniform();

  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();

  // Unbiased draw from [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  // Independent child stream, deterministic in (seed, stream_id).
  RngStream fork(std::uint64_t stream_id) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

// SplitMix64 finalizer; used to derive child seeds.
std::uint64_t mix_seed(std::uint64_t x);

Matrix rng_uniform(RngStream& stream, std::size_t rows, std::size_t cols);
Matrix rng_normal(RngStream& stream, std::size_t rows, std::size_t cols);

}  // namespace dlrm

#endif  // DLRM_DENSE_HPP_
