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

#include <doctest.h>
#include <mpfr.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dlrm/dense.hpp"
#include "dlrm/exact_sum.hpp"

namespace dlrm {
namespace {

// Correctly rounded sum computed with enough MPFR precision to be exact.
double mpfr_sum(const std::vector<double>& values) {
  mpfr_t acc;
  mpfr_t term;
  mpfr_init2(acc, 4096);
  mpfr_init2(term, 64);
  mpfr_set_zero(acc, 1);
  for (double v : values) {
    mpfr_set_d(term, v, MPFR_RNDN);
    mpfr_add(acc, acc, term, MPFR_RNDN);
  }
  const double out = mpfr_get_d(acc, MPFR_RNDN);
  mpfr_clear(acc);
  mpfr_clear(term);
  return out;
}

std::vector<double> random_values(RngStream& rng, std::size_t n, int min_exp, int max_exp) {
  std::vector<double> v(n);
  for (auto& x : v) {
    const int e = min_exp + static_cast<int>(rng.uniform_index(max_exp - min_exp + 1));
    x = std::ldexp(rng.uniform() + 0.5, e) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
  }
  return v;
}

double exact(const std::vector<double>& values) {
  ExactSum s;
  for (double v : values) s.add(v);
  return s.value();
}

TEST_CASE("empty and simple sums") {
  CHECK(ExactSum().value() == 0.0);
  CHECK(exact({1.0, 2.0, 3.5}) == 6.5);
  CHECK(exact({1e16, 1.0, -1e16}) == 1.0);
  CHECK(exact({0.1, 0.2, 0.3}) == mpfr_sum({0.1, 0.2, 0.3}));
}

TEST_CASE("matches an MPFR oracle over wide exponent ranges") {
  RngStream rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const auto values = random_values(rng, 1 + rng.uniform_index(300), -60, 60);
    CHECK(exact(values) == mpfr_sum(values));
  }
  for (int trial = 0; trial < 20; ++trial) {
    const auto values = random_values(rng, 50, -1070, 1000);
    CHECK(exact(values) == mpfr_sum(values));
  }
}

TEST_CASE("subnormals, cancellation and ties round correctly") {
  const double tiny = std::numeric_limits<double>::denorm_min();
  CHECK(exact({tiny, tiny, tiny}) == 3 * tiny);
  CHECK(exact({1.0, std::ldexp(1.0, -53)}) == 1.0);  // tie to even
  CHECK(exact({1.0 + std::ldexp(1.0, -52), std::ldexp(1.0, -53)}) ==
        1.0 + std::ldexp(1.0, -51));
  CHECK(exact({1.0, std::ldexp(1.0, -53), std::ldexp(1.0, -100)}) ==
        1.0 + std::ldexp(1.0, -52));  // sticky bit breaks the tie
  CHECK(exact({std::ldexp(1.0, 1000), -std::ldexp(1.0, 1000), -2.5}) == -2.5);
  const double big = std::numeric_limits<double>::max();
  CHECK(exact({big, big, -big}) == big);
  CHECK(std::isinf(exact({big, big})));
}

TEST_CASE("special values propagate") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(exact({1.0, inf}) == inf);
  CHECK(std::isnan(exact({inf, -inf})));
  CHECK(std::isnan(exact({1.0, std::nan("")})));
}

TEST_CASE("merge is exact and order independent") {
  RngStream rng(5);
  const auto values = random_values(rng, 1000, -40, 40);
  const double whole = exact(values);
  for (std::size_t parts : {2, 3, 7}) {
    std::vector<ExactSum> shards(parts);
    for (std::size_t i = 0; i < values.size(); ++i) shards[i % parts].add(values[i]);
    ExactSum forward;
    for (const auto& s : shards) forward.merge(s);
    ExactSum backward;
    for (auto it = shards.rbegin(); it != shards.rend(); ++it) backward.merge(*it);
    CHECK(forward.value() == whole);
    CHECK(backward.value() == whole);
  }
  CHECK(ExactSum().wire_bytes() <= ExactSum().wire_bytes() + 0);
}

TEST_CASE("many additions do not overflow the limbs") {
  ExactSum s;
  for (int i = 0; i < 3'000'000; ++i) s.add(std::numeric_limits<double>::max() / 8);
  CHECK(std::isinf(s.value()));
  ExactSum t;
  for (int i = 0; i < 3'000'000; ++i) t.add(0.5);
  CHECK(t.value() == 1'500'000.0);
}

TEST_CASE("exact matrix kernels") {
  RngStream rng(8);
  const Matrix a = rng_normal(rng, 9, 4);
  const Matrix b = rng_normal(rng, 9, 3);
  const Matrix c = matmul_tn_exact(a, b).rounded();
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      std::vector<double> terms;
      for (std::size_t s = 0; s < 9; ++s) terms.push_back(a(s, i) * b(s, j));
      CHECK(c(i, j) == mpfr_sum(terms));
    }
  }
  // Row shards merge to the same exact product.
  ExactMatrix top = matmul_tn_exact(a.slice_rows(0, 4), b.slice_rows(0, 4));
  top.merge(matmul_tn_exact(a.slice_rows(4, 9), b.slice_rows(4, 9)));
  CHECK(top.rounded() == c);
  const Matrix sums = column_sums_exact(a).rounded();
  CHECK(sums.rows() == 1);
  CHECK(max_abs_diff(sums, column_sums(a)) < 1e-12);
  CHECK_THROWS(top.merge(ExactMatrix(2, 2)));
}

}  // namespace
}  // namespace dlrm
