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

#include <cmath>
#include <vector>

#include "dlrm/error.hpp"
#include "dlrm/optim.hpp"
#include "dlrm/train.hpp"
#include "test_util.hpp"

namespace dlrm {
namespace {

std::vector<double> values(const Matrix& m) { return {m.data().begin(), m.data().end()}; }

TEST_CASE("sgd examples") {
  std::vector<double> theta = {1.0};
  const std::vector<double> g = {2.0};
  sgd_step(theta, g, 0.5);
  CHECK(theta[0] == 0.0);

  std::vector<double> same = {1.5, -2.0};
  sgd_step(same, std::vector<double>{3.0, 4.0}, 0.0);
  CHECK(same == std::vector<double>{1.5, -2.0});
  CHECK_THROWS_AS(sgd_step(same, std::vector<double>{1.0}, 0.1), Error);
}

TEST_CASE("adagrad examples") {
  std::vector<double> theta = {0.0};
  std::vector<double> acc = {0.0};
  adagrad_step(theta, std::vector<double>{1.0}, acc, 0.1, 0.0);
  CHECK(theta[0] == -0.1);
  CHECK(acc[0] == 1.0);
  // Second identical step: G = 2, step lr / sqrt(2).
  adagrad_step(theta, std::vector<double>{1.0}, acc, 0.1, 0.0);
  CHECK(acc[0] == 2.0);
  CHECK(std::abs(theta[0] - (-0.1 - 0.1 / std::sqrt(2.0))) < 1e-15);

  std::vector<double> frozen = {0.25};
  std::vector<double> frozen_acc = {0.0};
  adagrad_step(frozen, std::vector<double>{0.0}, frozen_acc, 0.1, 0.0);
  CHECK(frozen[0] == 0.25);
  CHECK(frozen_acc[0] == 0.0);
  CHECK_THROWS_AS(adagrad_step(frozen, std::vector<double>{1.0}, frozen_acc, 0.1, -1e-8), Error);
}

TEST_CASE("adagrad accumulator never decreases and steps shrink") {
  RngStream rng(1);
  std::vector<double> theta(6, 0.0);
  std::vector<double> acc(6, 0.0);
  std::vector<double> last_acc = acc;
  for (int step = 0; step < 100; ++step) {
    std::vector<double> g(6);
    for (auto& v : g) v = rng.uniform() < 0.3 ? 0.0 : rng.normal();
    adagrad_step(theta, g, acc, 0.1, kDefaultAdagradEps);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(acc[i] >= last_acc[i]);
      CHECK(std::isfinite(theta[i]));
    }
    last_acc = acc;
  }
}

TEST_CASE("row-sparse updates equal the dense path and leave other rows alone") {
  RngStream rng(2);
  const Matrix w0 = rng_normal(rng, 6, 3);
  SparseRowGrad grad;
  grad.rows = {1, 4};
  grad.values = rng_normal(rng, 2, 3);
  const Matrix dense_grad = densify(grad, 6);

  SUBCASE("sgd") {
    EmbeddingTable t(w0);
    sgd_step(t, grad, 0.3);
    std::vector<double> flat = values(w0);
    sgd_step(flat, dense_grad.data(), 0.3);
    CHECK(values(t.weights()) == flat);
  }
  SUBCASE("adagrad") {
    EmbeddingTable t(w0);
    Matrix acc(6, 3);
    for (int step = 0; step < 3; ++step) adagrad_step(t, grad, acc, 0.1, 1e-10);
    std::vector<double> flat = values(w0);
    std::vector<double> flat_acc(18, 0.0);
    for (int step = 0; step < 3; ++step) {
      adagrad_step(flat, dense_grad.data(), flat_acc, 0.1, 1e-10);
    }
    CHECK(values(t.weights()) == flat);
    CHECK(values(acc) == flat_acc);
    for (std::size_t r : {0, 2, 3, 5}) {
      for (std::size_t c = 0; c < 3; ++c) {
        CHECK(t.weights()(r, c) == w0(r, c));
        CHECK(acc(r, c) == 0.0);
      }
    }
  }
  SUBCASE("out-of-range rows") {
    EmbeddingTable t(w0);
    SparseRowGrad bad = grad;
    bad.rows = {1, 6};
    CHECK_THROWS_AS(sgd_step(t, bad, 0.1), Error);
  }
}

TEST_CASE("optimizer names") {
  CHECK(parse_optimizer_kind("sgd") == OptimizerKind::kSgd);
  CHECK(parse_optimizer_kind("adagrad") == OptimizerKind::kAdagrad);
  CHECK(to_string(OptimizerKind::kAdagrad) == "adagrad");
  CHECK_THROWS_AS(parse_optimizer_kind("adam"), Error);
  CHECK_THROWS_AS(Optimizer(OptimizerKind::kSgd, -0.1), Error);
}

TEST_CASE("training steps are deterministic and only touch referenced rows") {
  const DlrmConfig config = testing::toy_config();
  const auto batches = testing::random_batches(config, 4, 5, 33, 2);
  for (OptimizerKind kind : {OptimizerKind::kSgd, OptimizerKind::kAdagrad}) {
    DlrmModel a = DlrmModel::initialize(config);
    DlrmModel b = DlrmModel::initialize(config);
    Optimizer oa(kind, 0.05);
    Optimizer ob(kind, 0.05);
    for (const Batch& batch : batches) {
      const DlrmModel before = a;
      const StepResult ra = train_step(a, oa, batch);
      const StepResult rb = train_step(b, ob, batch);
      CHECK(ra == rb);
      CHECK(a == b);
      for (std::size_t t = 0; t < config.num_tables(); ++t) {
        std::vector<bool> used(config.embedding_sizes[t], false);
        for (RowIndex i : batch.sparse[t].indices) used[i] = true;
        for (std::size_t r = 0; r < used.size(); ++r) {
          if (used[r]) continue;
          for (std::size_t c = 0; c < config.sparse_dim; ++c) {
            CHECK(a.tables[t].weights()(r, c) == before.tables[t].weights()(r, c));
          }
        }
      }
    }
    CHECK(oa.state() == ob.state());
  }
}

}  // namespace
}  // namespace dlrm
