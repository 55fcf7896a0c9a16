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

#include "dlrm/dense.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>

#include "dlrm/error.hpp"

namespace dlrm {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw Error(ErrorCode::kDimensionMismatch,
                "matrix data length " + std::to_string(data_.size()) +
                    " does not match shape " + shape_string());
  }
}

Matrix Matrix::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) {
      throw Error(ErrorCode::kDimensionMismatch, "ragged matrix literal");
    }
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

Matrix Matrix::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > rows_) {
    throw Error(ErrorCode::kOutOfRange,
                "row slice [" + std::to_string(begin) + ", " +
                    std::to_string(end) + ") outside " + shape_string());
  }
  std::vector<double> data(data_.begin() + begin * cols_,
                           data_.begin() + end * cols_);
  return Matrix(end - begin, cols_, std::move(data));
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a,
                              const Matrix& b) {
  throw Error(ErrorCode::kDimensionMismatch,
              std::string(op) + ": incompatible shapes " + a.shape_string() +
                  " and " + b.shape_string());
}

// c[i][j] += a[i][k] * b[k][j]. Every output element is accumulated in
// ascending k, one rounded multiply and one rounded add per term, exactly as
// the textbook triple loop; blocking only reorders work across different
// output elements, so the result does not depend on the tile sizes or on
// which instruction set the kernel was compiled for.
constexpr std::size_t kMr = 4;    // rows per register block
constexpr std::size_t kNr = 8;    // columns per register block
constexpr std::size_t kKc = 256;  // depth of a packed panel

typedef double v4d __attribute__((vector_size(32)));

__attribute__((target_clones("avx2", "default")))
void micro_4x8(const double* const* arow, const double* bpanel, std::size_t kc,
               double* c, std::size_t ldc) {
  v4d acc[kMr][2];
  for (std::size_t r = 0; r < kMr; ++r) {
    std::memcpy(&acc[r][0], c + r * ldc, sizeof(v4d));
    std::memcpy(&acc[r][1], c + r * ldc + 4, sizeof(v4d));
  }
  for (std::size_t k = 0; k < kc; ++k) {
    v4d b0;
    v4d b1;
    std::memcpy(&b0, bpanel + k * kNr, sizeof(v4d));
    std::memcpy(&b1, bpanel + k * kNr + 4, sizeof(v4d));
    for (std::size_t r = 0; r < kMr; ++r) {
      const double av = arow[r][k];
      const v4d a = {av, av, av, av};
      acc[r][0] += a * b0;
      acc[r][1] += a * b1;
    }
  }
  for (std::size_t r = 0; r < kMr; ++r) {
    std::memcpy(c + r * ldc, &acc[r][0], sizeof(v4d));
    std::memcpy(c + r * ldc + 4, &acc[r][1], sizeof(v4d));
  }
}

void matmul_kernel(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t n = a.rows();
  const std::size_t inner = a.cols();
  const std::size_t m = b.cols();
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();
  const std::size_t n_full = n - n % kMr;
  const std::size_t m_full = m - m % kNr;
  std::vector<double> panel(kKc * kNr);

  for (std::size_t k0 = 0; k0 < inner; k0 += kKc) {
    const std::size_t kc = std::min(kKc, inner - k0);
    for (std::size_t j0 = 0; j0 < m_full; j0 += kNr) {
      for (std::size_t k = 0; k < kc; ++k) {
        std::copy_n(pb + (k0 + k) * m + j0, kNr, panel.data() + k * kNr);
      }
      for (std::size_t i0 = 0; i0 < n_full; i0 += kMr) {
        const double* rows[kMr];
        for (std::size_t r = 0; r < kMr; ++r) rows[r] = pa + (i0 + r) * inner + k0;
        micro_4x8(rows, panel.data(), kc, pc + i0 * m + j0, m);
      }
      // Leftover rows of this column block.
      for (std::size_t i = n_full; i < n; ++i) {
        const double* arow = pa + i * inner + k0;
        double* crow = pc + i * m + j0;
        for (std::size_t k = 0; k < kc; ++k) {
          for (std::size_t j = 0; j < kNr; ++j) crow[j] += arow[k] * panel[k * kNr + j];
        }
      }
    }
    // Leftover columns.
    if (m_full < m) {
      for (std::size_t i = 0; i < n; ++i) {
        const double* arow = pa + i * inner + k0;
        double* crow = pc + i * m;
        for (std::size_t k = 0; k < kc; ++k) {
          const double* brow = pb + (k0 + k) * m;
          for (std::size_t j = m_full; j < m; ++j) crow[j] += arow[k] * brow[j];
        }
      }
    }
  }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  Matrix c(a.rows(), b.cols());
  matmul_kernel(a, b, c);
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) shape_error("matmul_nt", a, b);
  Matrix c(a.rows(), b.rows());
  matmul_kernel(a, transpose(b), c);
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) shape_error("matmul_tn", a, b);
  Matrix c(a.cols(), b.cols());
  matmul_kernel(transpose(a), b, c);
  return c;
}

Matrix column_sums(const Matrix& a) {
  Matrix out(1, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) out(0, j) += r[j];
  }
  return out;
}

double dot(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "dot: length " + std::to_string(u.size()) + " vs " +
                    std::to_string(v.size()));
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) acc += u[k] * v[k];
  return acc;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    shape_error("max_abs_diff", a, b);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  }
  return worst;
}

std::string to_string(Activation kind) {
  switch (kind) {
    case Activation::kIdentity: return "identity";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "unknown";
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double activate(double x, Activation kind) {
  switch (kind) {
    case Activation::kIdentity: return x;
    case Activation::kRelu: return x > 0.0 ? x : 0.0;
    case Activation::kSigmoid: return sigmoid(x);
  }
  return x;
}

double activate_grad(double x, Activation kind) {
  switch (kind) {
    case Activation::kIdentity: return 1.0;
    case Activation::kRelu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::kSigmoid: {
      const double s = sigmoid(x);
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

Matrix activation(const Matrix& x, Activation kind) {
  Matrix y = x;
  for (double& v : y.data()) v = activate(v, kind);
  return y;
}

Matrix activation_grad(const Matrix& x, Activation kind) {
  Matrix y = x;
  for (double& v : y.data()) v = activate_grad(v, kind);
  return y;
}

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  if (spare_normal_) {
    const double v = *spare_normal_;
    spare_normal_.reset();
    return v;
  }
  // 1 - uniform() lies in (0, 1], keeping the log finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  if (n == 0) {
    throw Error(ErrorCode::kInvalidArgument, "uniform_index: empty range");
  }
  // Rejection keeps the draw unbiased for any n.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

RngStream RngStream::fork(std::uint64_t stream_id) const {
  return RngStream(mix_seed(seed_ ^ mix_seed(stream_id)));
}

Matrix rng_uniform(RngStream& stream, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = stream.uniform();
  return m;
}

Matrix rng_normal(RngStream& stream, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = stream.normal();
  return m;
}

}  // namespace dlrm
