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
#include <numeric>
#include <string>
#include <vector>

#include "dlrm/error.hpp"
#include "dlrm/model.hpp"
#include "test_util.hpp"

namespace dlrm {
namespace {

DenseLayer layer(Matrix w, std::vector<double> b, Activation act) {
  return DenseLayer{std::move(w), std::move(b), act};
}

double sum_product(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

TEST_CASE("mlp forward examples") {
  MlpParams eye;
  eye.layers.push_back(layer(Matrix::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}), {0, 0, 0},
                             Activation::kRelu));
  const Matrix x = Matrix::from_rows({{0.5, 2, 0}, {3, 0.25, 1}});
  CHECK(mlp_forward(eye, x).y == x);

  RngStream rng(4);
  const Matrix w = rng_normal(rng, 2, 3);
  MlpParams affine;
  affine.layers.push_back(layer(w, {0.5, -1}, Activation::kIdentity));
  Matrix expected = matmul_nt(x, w);
  for (std::size_t i = 0; i < 2; ++i) {
    expected(i, 0) += 0.5;
    expected(i, 1) += -1;
  }
  CHECK(mlp_forward(affine, x).y == expected);

  MlpParams zeros;
  zeros.layers.push_back(layer(Matrix(4, 3), std::vector<double>(4, 0.0), Activation::kRelu));
  zeros.layers.push_back(layer(Matrix(2, 4), std::vector<double>(2, 0.0), Activation::kSigmoid));
  const Matrix y = mlp_forward(zeros, x).y;
  for (double v : y.data()) CHECK(v == 0.5);
}

TEST_CASE("mlp validation and make_mlp shapes") {
  RngStream rng(1);
  const std::vector<std::size_t> dims = {5, 4, 2};
  const MlpParams p = make_mlp(dims, Activation::kRelu, Activation::kSigmoid, rng);
  CHECK(p.input_dim() == 5);
  CHECK(p.output_dim() == 2);
  CHECK(p.layers[0].activation == Activation::kRelu);
  CHECK(p.layers[1].activation == Activation::kSigmoid);
  CHECK_NOTHROW(p.validate());
  MlpParams broken = p;
  broken.layers[1].weight = Matrix(2, 3);
  CHECK_THROWS_AS(broken.validate(), Error);
  CHECK_THROWS_AS(mlp_forward(p, Matrix(3, 4)), Error);
}

TEST_CASE("mlp backward: zero upstream gradient and the linear case") {
  RngStream rng(2);
  const std::vector<std::size_t> dims = {3, 4, 2};
  const MlpParams p = make_mlp(dims, Activation::kRelu, Activation::kSigmoid, rng);
  const Matrix x = rng_normal(rng, 5, 3);
  const MlpOutput out = mlp_forward(p, x);
  const MlpGrads zero = mlp_backward(p, out.cache, Matrix(5, 2));
  for (const auto& w : zero.weights) CHECK(w == Matrix(w.rows(), w.cols()));
  for (const auto& b : zero.biases) {
    for (double v : b) CHECK(v == 0.0);
  }
  CHECK(zero.input == Matrix(5, 3));

  MlpParams lin;
  lin.layers.push_back(layer(rng_normal(rng, 2, 3), {0, 0}, Activation::kIdentity));
  const MlpOutput lo = mlp_forward(lin, x);
  const Matrix gy = rng_normal(rng, 5, 2);
  const MlpGrads g = mlp_backward(lin, lo.cache, gy);
  CHECK(g.weights[0] == matmul_tn(gy, x));
  CHECK(g.input == matmul(gy, lin.layers[0].weight));
  CHECK(max_abs_diff(Matrix(1, 2, g.biases[0]), column_sums(gy)) == 0.0);
}

TEST_CASE("mlp gradients match finite differences") {
  RngStream rng(3);
  const std::vector<std::size_t> dims = {3, 5, 2};
  MlpParams p = make_mlp(dims, Activation::kSigmoid, Activation::kIdentity, rng);
  Matrix x = rng_normal(rng, 4, 3);
  const Matrix gy = rng_normal(rng, 4, 2);
  auto f = [&] { return sum_product(mlp_forward(p, x).y, gy); };
  const MlpGrads g = mlp_backward(p, mlp_forward(p, x).cache, gy);
  const double h = 1e-6;
  auto probe = [&](double& slot, double analytic) {
    const double saved = slot;
    slot = saved + h;
    const double up = f();
    slot = saved - h;
    const double down = f();
    slot = saved;
    CHECK(std::abs((up - down) / (2 * h) - analytic) < 1e-7);
  };
  for (std::size_t l = 0; l < 2; ++l) {
    auto& w = p.layers[l].weight;
    for (std::size_t i = 0; i < w.size(); ++i) probe(w.data()[i], g.weights[l].data()[i]);
    for (std::size_t i = 0; i < p.layers[l].bias.size(); ++i) {
      probe(p.layers[l].bias[i], g.biases[l][i]);
    }
  }
  for (std::size_t i = 0; i < x.size(); ++i) probe(x.data()[i], g.input.data()[i]);
}

TEST_CASE("exact and ordered reductions agree closely; partials merge exactly") {
  RngStream rng(5);
  const std::vector<std::size_t> dims = {3, 4, 1};
  const MlpParams p = make_mlp(dims, Activation::kRelu, Activation::kIdentity, rng);
  const Matrix x = rng_normal(rng, 9, 3);
  const Matrix gy = rng_normal(rng, 9, 1);
  const MlpOutput out = mlp_forward(p, x);
  const MlpGrads ordered = mlp_backward(p, out.cache, gy, Reduction::kOrdered);
  const MlpGrads exact = mlp_backward(p, out.cache, gy, Reduction::kExact);
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(max_abs_diff(ordered.weights[l], exact.weights[l]) < 1e-12);
  }
  MlpPartialGrads a = mlp_backward_partial(p, mlp_forward(p, x.slice_rows(0, 4)).cache,
                                           gy.slice_rows(0, 4));
  const MlpPartialGrads b = mlp_backward_partial(p, mlp_forward(p, x.slice_rows(4, 9)).cache,
                                                 gy.slice_rows(4, 9));
  a.merge(b);
  const MlpGrads merged = a.rounded();
  CHECK(merged.weights == exact.weights);
  CHECK(merged.biases == exact.biases);
}

TEST_CASE("interaction examples") {
  const Matrix dense = Matrix::from_rows({{1, 0}});
  const std::vector<Matrix> emb = {Matrix::from_rows({{0, 1}}), Matrix::from_rows({{1, 1}})};
  CHECK(interact(dense, emb) == Matrix::from_rows({{1, 0, 0, 1, 1}}));
  CHECK(interact(dense, std::vector<Matrix>{}) == dense);
  CHECK(interaction_width(16, 27) == 367);
  CHECK(interaction_width(3, 1) == 3);
  CHECK_THROWS_AS(interact(dense, std::vector<Matrix>{Matrix(1, 3)}), Error);
  CHECK_THROWS_AS(interact(dense, std::vector<Matrix>{Matrix(2, 2)}), Error);
}

TEST_CASE("interaction backward by hand and by finite differences") {
  // Single pair: out = [z0, z0.z1]; d/dz0 of the pair term is z1.
  const Matrix z0 = Matrix::from_rows({{1, 2}});
  const std::vector<Matrix> z1 = {Matrix::from_rows({{3, -1}})};
  const InteractionGrads hand = interact_backward(z0, z1, Matrix::from_rows({{0, 0, 1}}));
  CHECK(hand.dense == Matrix::from_rows({{3, -1}}));
  CHECK(hand.embedded[0] == Matrix::from_rows({{1, 2}}));

  RngStream rng(6);
  for (std::size_t nt : {1, 3}) {
    Matrix dense = rng_normal(rng, 2, 3);
    std::vector<Matrix> emb;
    for (std::size_t t = 0; t < nt; ++t) emb.push_back(rng_normal(rng, 2, 3));
    const Matrix go = rng_normal(rng, 2, interaction_width(3, nt + 1));
    const InteractionGrads g = interact_backward(dense, emb, go);
    auto f = [&] { return sum_product(interact(dense, emb), go); };
    const double h = 1e-6;
    auto probe = [&](double& slot, double analytic) {
      const double saved = slot;
      slot = saved + h;
      const double up = f();
      slot = saved - h;
      const double down = f();
      slot = saved;
      CHECK(std::abs((up - down) / (2 * h) - analytic) < 1e-7);
    };
    for (std::size_t i = 0; i < dense.size(); ++i) probe(dense.data()[i], g.dense.data()[i]);
    for (std::size_t t = 0; t < nt; ++t) {
      for (std::size_t i = 0; i < emb[t].size(); ++i) {
        probe(emb[t].data()[i], g.embedded[t].data()[i]);
      }
    }
  }
}

TEST_CASE("interaction is equivariant to permuting the embedded features") {
  RngStream rng(7);
  const Matrix dense = rng_normal(rng, 3, 2);
  std::vector<Matrix> emb = {rng_normal(rng, 3, 2), rng_normal(rng, 3, 2), rng_normal(rng, 3, 2)};
  const Matrix a = interact(dense, emb);
  std::swap(emb[0], emb[2]);
  const Matrix b = interact(dense, emb);
  // Pair columns in row-major (i, j) order after the dense block:
  // (0,1) (0,2) (0,3) (1,2) (1,3) (2,3). Swapping features 1 and 3 maps
  // (0,1)<->(0,3), (1,2)<->(2,3) and fixes (0,2), (1,3).
  const std::size_t perm[] = {0, 1, 4, 3, 2, 7, 6, 5};
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 8; ++c) CHECK(a(r, c) == b(r, perm[c]));
  }
}

DlrmModel zero_model(const DlrmConfig& config) {
  DlrmModel m = DlrmModel::initialize(config);
  for (auto* mlp : {&m.bottom, &m.top}) {
    for (auto& l : mlp->layers) {
      std::fill(l.weight.data().begin(), l.weight.data().end(), 0.0);
      std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
  }
  for (auto& t : m.tables) std::fill(t.weights().data().begin(), t.weights().data().end(), 0.0);
  return m;
}

TEST_CASE("dlrm forward: zero parameters give 0.5 and stages compose exactly") {
  const DlrmConfig config = testing::toy_config();
  const auto batches = testing::random_batches(config, 5, 1, 9);
  const Batch& b = batches[0];
  const DlrmOutput z = dlrm_forward(zero_model(config), b.dense, b.sparse);
  CHECK(z.probs.size() == 5);
  for (double p : z.probs) CHECK(p == 0.5);

  const DlrmModel model = DlrmModel::initialize(config);
  const DlrmOutput full = dlrm_forward(model, b.dense, b.sparse);
  std::vector<Matrix> emb;
  for (std::size_t t = 0; t < config.num_tables(); ++t) {
    emb.push_back(embed_table(model, b.sparse[t], t));
    CHECK(emb.back() == lookup_batch(model.tables[t], b.sparse[t]));
  }
  const Matrix bottom = mlp_forward(model.bottom, b.dense).y;
  const Matrix logits = mlp_forward(model.top, interact(bottom, emb)).y;
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(full.cache.logits(i, 0) == logits(i, 0));
    CHECK(full.probs[i] == sigmoid(logits(i, 0)));
  }
  CHECK(dlrm_forward_from_embeddings(model, b.dense, emb).probs == full.probs);
}

TEST_CASE("dlrm forward rejects a wrong number of tables") {
  const DlrmConfig config = testing::toy_config();
  const auto batches = testing::random_batches(config, 2, 1, 9);
  const DlrmModel model = DlrmModel::initialize(config);
  std::vector<SparseBatch> one = {batches[0].sparse[0]};
  CHECK_THROWS_AS(dlrm_forward(model, batches[0].dense, one), Error);
}

TEST_CASE("initialization is seeded") {
  CHECK(DlrmModel::initialize(testing::toy_config(3)) == DlrmModel::initialize(testing::toy_config(3)));
  CHECK_FALSE(DlrmModel::initialize(testing::toy_config(3)) ==
              DlrmModel::initialize(testing::toy_config(4)));
  const DlrmModel m = DlrmModel::initialize(testing::toy_config(3));
  const double bound = 1.0 / std::sqrt(3.0);
  for (double v : m.tables[0].weights().data()) CHECK(std::abs(v) <= bound);
}

TEST_CASE("binary cross-entropy") {
  const std::vector<double> half(4, 0.5);
  const std::vector<double> labels = {0, 1, 1, 0};
  const LossResult r = bce_loss(half, labels);
  CHECK(std::abs(r.loss - std::log(2.0)) < 1e-15);
  CHECK(r.grad_logits == Matrix::from_rows({{0.125}, {-0.125}, {-0.125}, {0.125}}));

  const std::vector<double> perfect = {0, 1, 1, 0};
  CHECK(bce_loss(perfect, labels).loss == 0.0);
  CHECK(bce_loss(std::vector<double>{1, 0}, std::vector<double>{0, 1}).loss == 100.0);

  CHECK_THROWS_AS(bce_loss(std::vector<double>{}, std::vector<double>{}), Error);
  CHECK_THROWS_AS(bce_loss(half, std::vector<double>{0, 1}), Error);
  CHECK_THROWS_AS(bce_loss(std::vector<double>{0.5}, std::vector<double>{0.5}), Error);

  CHECK(accuracy(std::vector<double>{0.9, 0.2, 0.6}, std::vector<double>{1, 0, 0}) ==
        doctest::Approx(2.0 / 3.0));
}

TEST_CASE("bce gradient with respect to logits matches finite differences") {
  const std::vector<double> logits = {-2.0, -0.3, 0.0, 0.7, 3.1};
  const std::vector<double> labels = {0, 1, 1, 0, 1};
  auto loss_at = [&](const std::vector<double>& z) {
    std::vector<double> p;
    for (double v : z) p.push_back(sigmoid(v));
    return bce_loss(p, labels).loss;
  };
  std::vector<double> probs;
  for (double v : logits) probs.push_back(sigmoid(v));
  const LossResult r = bce_loss(probs, labels);
  const double h = 1e-6;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    auto up = logits;
    auto down = logits;
    up[i] += h;
    down[i] -= h;
    CHECK(std::abs((loss_at(up) - loss_at(down)) / (2 * h) - r.grad_logits(i, 0)) < 1e-7);
  }
  const LossTerms shard = bce_terms(std::span(probs).subspan(0, 2),
                                    std::span(labels).subspan(0, 2), 5);
  CHECK(shard.per_sample.size() == 2);
  CHECK(shard.grad_logits(1, 0) == r.grad_logits(1, 0));
}

TEST_CASE("factorization machine") {
  FmParams p;
  p.bias = 0.75;
  p.linear = {0.5, -1.0, 2.0};
  RngStream rng(8);
  p.factors = rng_normal(rng, 3, 2);
  const std::vector<double> zero(3, 0.0);
  CHECK(fm_predict(p, zero) == 0.75);
  CHECK(fm_predict_naive(p, zero) == 0.75);

  FmParams pair;
  pair.linear = {0, 0};
  pair.factors = Matrix::from_rows({{1}, {2}});
  const std::vector<double> ones = {1, 1};
  CHECK(fm_predict_naive(pair, ones) == 2.0);
  CHECK(fm_predict(pair, ones) == 2.0);

  for (int trial = 0; trial < 50; ++trial) {
    FmParams q;
    const std::size_t n = 1 + rng.uniform_index(8);
    q.bias = rng.normal();
    for (std::size_t i = 0; i < n; ++i) q.linear.push_back(rng.normal());
    q.factors = rng_normal(rng, n, 1 + rng.uniform_index(4));
    std::vector<double> x(n);
    for (auto& v : x) v = rng.normal();
    CHECK(std::abs(fm_predict(q, x) - fm_predict_naive(q, x)) < 1e-10);
  }
  CHECK_THROWS_AS(fm_predict(p, ones), Error);
}

TEST_CASE("parameter counts") {
  DlrmConfig one;
  one.embedding_sizes = {10};
  one.sparse_dim = 4;
  CHECK(param_count(one) == 40);

  DlrmConfig desk;
  desk.embedding_sizes = std::vector<std::size_t>(8, 1'000'000);
  desk.sparse_dim = 64;
  CHECK(embedding_param_count(desk) == 512'000'000);

  DlrmConfig bot;
  bot.embedding_sizes = {};
  bot.sparse_dim = 64;
  bot.bottom_mlp = {512, 512, 64};
  CHECK(param_count(bot) == 295'488);

  const DlrmConfig toy = testing::toy_config();
  // Tables 2*7*3, bottom 4*3+3, top 6*10+10 + 10*4+4 + 4*1+1.
  CHECK(param_count(toy) == 42 + 15 + 70 + 44 + 5);
  const DlrmModel m = DlrmModel::initialize(toy);
  std::uint64_t counted = 0;
  for (const auto& t : m.tables) counted += t.weights().size();
  for (const auto* mlp : {&m.bottom, &m.top}) {
    for (const auto& l : mlp->layers) counted += l.weight.size() + l.bias.size();
  }
  CHECK(counted == param_count(toy));
}

TEST_CASE("config validation names the violated constraint") {
  auto expect = [](DlrmConfig c, const std::string& fragment) {
    try {
      c.validate();
      FAIL("expected an error for " << fragment);
    } catch (const Error& e) {
      INFO(e.what());
      CHECK(std::string(e.what()).find(fragment) != std::string::npos);
    }
  };
  DlrmConfig c = testing::toy_config();
  CHECK_NOTHROW(c.validate());
  c.bottom_mlp = {4, 2};
  expect(c, "sparse");
  c = testing::toy_config();
  c.top_mlp = {10, 4, 2};
  expect(c, "top");
  c = testing::toy_config();
  c.sparse_dim = 0;
  expect(c, "sparse");
  c = testing::toy_config();
  c.embedding_sizes = {7, 0};
  expect(c, "table");
}

}  // namespace
}  // namespace dlrm
