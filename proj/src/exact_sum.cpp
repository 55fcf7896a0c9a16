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

#include "dlrm/exact_sum.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "dlrm/error.hpp"

namespace dlrm {

namespace {

constexpr std::int64_t kLimbRadix = std::int64_t{1} << 32;
constexpr std::uint32_t kMaxPending = 1u << 30;
constexpr int kExponentBias = 1074;

}  // namespace

void ExactSum::reserve_limbs(int lo, int hi) {
  if (limbs_.empty()) {
    base_ = lo;
    limbs_.assign(static_cast<std::size_t>(hi - lo), 0);
    return;
  }
  if (lo < base_) {
    limbs_.insert(limbs_.begin(), static_cast<std::size_t>(base_ - lo), 0);
    base_ = lo;
  }
  const int top = base_ + static_cast<int>(limbs_.size());
  if (hi > top) limbs_.resize(limbs_.size() + static_cast<std::size_t>(hi - top), 0);
}

void ExactSum::add(double v) {
  if (v == 0.0) return;
  if (!std::isfinite(v)) {
    special_ += v;
    has_special_ = true;
    return;
  }
  const auto bits = std::bit_cast<std::uint64_t>(v);
  const bool negative = (bits >> 63) != 0;
  const int biased_exp = static_cast<int>((bits >> 52) & 0x7ff);
  std::uint64_t mantissa = bits & ((std::uint64_t{1} << 52) - 1);
  if (biased_exp != 0) mantissa |= std::uint64_t{1} << 52;
  // v = mantissa * 2^(offset - 1074)
  const int offset = std::max(biased_exp, 1) - 1;
  const int limb = offset >> 5;
  const int shift = offset & 31;
  const unsigned __int128 wide = static_cast<unsigned __int128>(mantissa) << shift;
  const std::int64_t chunks[3] = {
      static_cast<std::int64_t>(wide & 0xffffffffu),
      static_cast<std::int64_t>((wide >> 32) & 0xffffffffu),
      static_cast<std::int64_t>(wide >> 64),
  };
  reserve_limbs(limb, limb + 3);
  const std::size_t at = static_cast<std::size_t>(limb - base_);
  for (std::size_t i = 0; i < 3; ++i) {
    limbs_[at + i] += negative ? -chunks[i] : chunks[i];
  }
  if (++pending_ >= kMaxPending) normalize();
}

void ExactSum::merge(const ExactSum& other) {
  if (other.has_special_) {
    special_ += other.special_;
    has_special_ = true;
  }
  if (other.limbs_.empty()) return;
  if (pending_ + other.pending_ + 1 >= kMaxPending) normalize();
  const int other_top = other.base_ + static_cast<int>(other.limbs_.size());
  reserve_limbs(other.base_, other_top);
  const std::size_t at = static_cast<std::size_t>(other.base_ - base_);
  for (std::size_t i = 0; i < other.limbs_.size(); ++i) {
    limbs_[at + i] += other.limbs_[i];
  }
  pending_ += other.pending_ + 1;
  if (pending_ >= kMaxPending) normalize();
}

// Brings every limb but the top one into [0, 2^32) and keeps the top limb in
// (-2^32, 2^32) by growing the window.
void ExactSum::normalize() {
  for (std::size_t i = 0; i + 1 < limbs_.size(); ++i) {
    const std::int64_t carry = limbs_[i] >> 32;
    limbs_[i] -= carry * kLimbRadix;
    limbs_[i + 1] += carry;
  }
  while (!limbs_.empty() &&
         (limbs_.back() >= kLimbRadix || limbs_.back() <= -kLimbRadix)) {
    const std::int64_t carry = limbs_.back() >> 32;
    limbs_.back() -= carry * kLimbRadix;
    limbs_.push_back(carry);
  }
  pending_ = 0;
}

double ExactSum::value() const {
  if (has_special_) return special_;
  ExactSum work = *this;
  work.normalize();
  auto& limbs = work.limbs_;
  while (!limbs.empty() && limbs.back() == 0) limbs.pop_back();
  if (limbs.empty()) return 0.0;

  const bool negative = limbs.back() < 0;
  if (negative) {
    for (auto& l : limbs) l = -l;
    work.normalize();
    while (!limbs.empty() && limbs.back() == 0) limbs.pop_back();
  }

  const int base = work.base_;
  auto bit_at = [&](int pos) -> std::uint64_t {
    const int idx = (pos >> 5) - base;
    if (idx < 0 || idx >= static_cast<int>(limbs.size())) return 0;
    return (static_cast<std::uint64_t>(limbs[static_cast<std::size_t>(idx)]) >>
            (pos & 31)) & 1u;
  };

  const auto top = static_cast<std::uint64_t>(limbs.back());
  const int highest = 32 * (base + static_cast<int>(limbs.size()) - 1) +
                      (63 - std::countl_zero(top));
  int lowest = std::max(highest - 52, 0);
  std::uint64_t mantissa = 0;
  for (int p = highest; p >= lowest; --p) mantissa = (mantissa << 1) | bit_at(p);

  if (lowest > 0) {
    const bool round_bit = bit_at(lowest - 1) != 0;
    bool sticky = false;
    const int sticky_end = lowest - 1;  // bits [0, sticky_end)
    for (std::size_t i = 0; i < limbs.size() && !sticky; ++i) {
      const int first = 32 * (base + static_cast<int>(i));
      if (first >= sticky_end) break;
      auto chunk = static_cast<std::uint64_t>(limbs[i]);
      const int keep = sticky_end - first;
      if (keep < 32) chunk &= (std::uint64_t{1} << keep) - 1;
      sticky = chunk != 0;
    }
    if (round_bit && (sticky || (mantissa & 1u))) {
      ++mantissa;
      if (mantissa == (std::uint64_t{1} << 53)) {
        mantissa >>= 1;
        ++lowest;
      }
    }
  }
  const double magnitude =
      std::ldexp(static_cast<double>(mantissa), lowest - kExponentBias);
  return negative ? -magnitude : magnitude;
}

std::size_t ExactSum::wire_bytes() const {
  return limbs_.size() * sizeof(std::int64_t) + sizeof(std::int32_t);
}

void ExactMatrix::merge(const ExactMatrix& other) {
  if (other.rows_ != rows_ || other.cols_ != cols_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "exact merge: " + std::to_string(rows_) + "x" +
                    std::to_string(cols_) + " vs " +
                    std::to_string(other.rows_) + "x" +
                    std::to_string(other.cols_));
  }
  for (std::size_t i = 0; i < cells_.size(); ++i) cells_[i].merge(other.cells_[i]);
}

Matrix ExactMatrix::rounded() const {
  Matrix out(rows_, cols_);
  for (std::size_t i = 0; i < cells_.size(); ++i) out.data()[i] = cells_[i].value();
  return out;
}

std::size_t ExactMatrix::wire_bytes() const {
  std::size_t total = 0;
  for (const auto& c : cells_) total += c.wire_bytes();
  return total;
}

ExactMatrix matmul_tn_exact(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "matmul_tn_exact: incompatible shapes " + a.shape_string() +
                    " and " + b.shape_string());
  }
  ExactMatrix c(a.cols(), b.cols());
  for (std::size_t s = 0; s < a.rows(); ++s) {
    for (std::size_t o = 0; o < a.cols(); ++o) {
      const double aso = a(s, o);
      for (std::size_t j = 0; j < b.cols(); ++j) c(o, j).add(aso * b(s, j));
    }
  }
  return c;
}

ExactMatrix column_sums_exact(const Matrix& a) {
  ExactMatrix c(1, a.cols());
  for (std::size_t s = 0; s < a.rows(); ++s) {
    for (std::size_t j = 0; j < a.cols(); ++j) c(0, j).add(a(s, j));
  }
  return c;
}

}  // namespace dlrm
