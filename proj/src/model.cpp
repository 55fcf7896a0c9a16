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

#include "dlrm/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dlrm/error.hpp"

namespace dlrm {

namespace {

std::string dims_string(std::span<const std::size_t> dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += "-";
    s += std::to_string(dims[i]);
  }
  return s;
}

void add_bias_rows(Matrix& m, const std::vector<double>& bias) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) r[j] += bias[j];
  }
}

void check_cache(const MlpParams& p, const MlpCache& cache, const Matrix& grad_y) {
  if (cache.inputs.size() != p.layers.size() ||
      cache.pre_activations.size() != p.layers.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "mlp_backward: cache holds " + std::to_string(cache.inputs.size()) +
                    " layers, parameters have " + std::to_string(p.layers.size()));
  }
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& w = p.layers[l].weight;
    if (cache.inputs[l].cols() != w.cols() ||
        cache.pre_activations[l].cols() != w.rows() ||
        cache.pre_activations[l].rows() != cache.inputs[l].rows()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "mlp_backward: stale cache at layer " + std::to_string(l));
    }
  }
  const std::size_t batch = p.layers.empty() ? grad_y.rows() : cache.inputs.front().rows();
  const std::size_t out = p.layers.empty() ? grad_y.cols() : p.output_dim();
  if (grad_y.rows() != batch || grad_y.cols() != out) {
    throw Error(ErrorCode::kDimensionMismatch,
                "mlp_backward: grad_y is " + grad_y.shape_string() + ", expected " +
                    std::to_string(batch) + "x" + std::to_string(out));
  }
}

// Walks the layers in reverse. `reduce(l, gz, input)` receives the gradient
// with respect to layer l's pre-activation and that layer's input.
template <class Reduce>
Matrix backward_walk(const MlpParams& p, const MlpCache& cache,
                     const Matrix& grad_y, Reduce&& reduce) {
  check_cache(p, cache, grad_y);
  Matrix g = grad_y;
  for (std::size_t l = p.layers.size(); l-- > 0;) {
    const auto& layer = p.layers[l];
    if (layer.activation != Activation::kIdentity) {
      const auto& pre = cache.pre_activations[l];
      for (std::size_t i = 0; i < g.size(); ++i) {
        g.data()[i] *= activate_grad(pre.data()[i], layer.activation);
      }
    }
    reduce(l, g, cache.inputs[l]);
    g = matmul(g, layer.weight);
  }
  return g;
}

}  // namespace

std::size_t MlpParams::input_dim() const {
  return layers.empty() ? 0 : layers.front().weight.cols();
}

std::size_t MlpParams::output_dim() const {
  return layers.empty() ? 0 : layers.back().weight.rows();
}

void MlpParams::validate() const {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].bias.size() != layers[l].weight.rows()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "layer " + std::to_string(l) + ": bias length " +
                      std::to_string(layers[l].bias.size()) + " != rows of weight " +
                      layers[l].weight.shape_string());
    }
    if (l > 0 && layers[l].weight.cols() != layers[l - 1].weight.rows()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "layer " + std::to_string(l) + " expects input width " +
                      std::to_string(layers[l].weight.cols()) + " but layer " +
                      std::to_string(l - 1) + " produces " +
                      std::to_string(layers[l - 1].weight.rows()));
    }
  }
}

MlpParams make_mlp(std::span<const std::size_t> dims, Activation hidden,
                   Activation last, RngStream& stream) {
  MlpParams p;
  for (std::size_t l = 1; l < dims.size(); ++l) {
    const std::size_t n_in = dims[l - 1];
    const std::size_t n_out = dims[l];
    const double stddev = std::sqrt(2.0 / static_cast<double>(n_in + n_out));
    DenseLayer layer;
    layer.weight = rng_normal(stream, n_out, n_in);
    for (double& v : layer.weight.data()) v *= stddev;
    layer.bias.assign(n_out, 0.0);
    layer.activation = (l + 1 == dims.size()) ? last : hidden;
    p.layers.push_back(std::move(layer));
  }
  return p;
}

MlpOutput mlp_forward(const MlpParams& p, const Matrix& x) {
  p.validate();
  if (!p.layers.empty() && x.cols() != p.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "mlp_forward: input is " + x.shape_string() + ", MLP expects " +
                    std::to_string(p.input_dim()) + " columns");
  }
  MlpOutput out;
  out.y = x;
  for (const auto& layer : p.layers) {
    Matrix pre = matmul_nt(out.y, layer.weight);
    add_bias_rows(pre, layer.bias);
    out.cache.inputs.push_back(std::move(out.y));
    out.y = activation(pre, layer.activation);
    out.cache.pre_activations.push_back(std::move(pre));
  }
  return out;
}

MlpGrads mlp_backward(const MlpParams& p, const MlpCache& cache,
                      const Matrix& grad_y, Reduction reduction) {
  if (reduction == Reduction::kExact) {
    return mlp_backward_partial(p, cache, grad_y).rounded();
  }
  MlpGrads grads;
  grads.weights.resize(p.layers.size());
  grads.biases.resize(p.layers.size());
  grads.input = backward_walk(p, cache, grad_y,
                              [&](std::size_t l, const Matrix& gz, const Matrix& in) {
                                grads.weights[l] = matmul_tn(gz, in);
                                const Matrix b = column_sums(gz);
                                grads.biases[l].assign(b.data().begin(), b.data().end());
                              });
  return grads;
}

MlpPartialGrads mlp_backward_partial(const MlpParams& p, const MlpCache& cache,
                                     const Matrix& grad_y) {
  MlpPartialGrads grads;
  grads.weights.resize(p.layers.size());
  grads.biases.resize(p.layers.size());
  grads.input = backward_walk(p, cache, grad_y,
                              [&](std::size_t l, const Matrix& gz, const Matrix& in) {
                                grads.weights[l] = matmul_tn_exact(gz, in);
                                grads.biases[l] = column_sums_exact(gz);
                              });
  return grads;
}

void MlpPartialGrads::merge(const MlpPartialGrads& other) {
  if (other.weights.size() != weights.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "merging gradients of different MLPs");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l].merge(other.weights[l]);
    biases[l].merge(other.biases[l]);
  }
}

MlpGrads MlpPartialGrads::rounded() const {
  MlpGrads g;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    g.weights.push_back(weights[l].rounded());
    const Matrix b = biases[l].rounded();
    g.biases.emplace_back(b.data().begin(), b.data().end());
  }
  g.input = input;
  return g;
}

std::size_t MlpPartialGrads::wire_bytes() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    total += weights[l].wire_bytes() + biases[l].wire_bytes();
  }
  return total;
}

std::size_t interaction_width(std::size_t dim, std::size_t num_features) {
  if (num_features == 0) return dim;
  return dim + num_features * (num_features - 1) / 2;
}

Matrix interact(const Matrix& dense, std::span<const Matrix> embedded) {
  const std::size_t batch = dense.rows();
  const std::size_t d = dense.cols();
  for (std::size_t t = 0; t < embedded.size(); ++t) {
    if (embedded[t].rows() != batch || embedded[t].cols() != d) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "interact: embedding output " + std::to_string(t) + " is " +
                      embedded[t].shape_string() + ", dense is " + dense.shape_string());
    }
  }
  const std::size_t nf = embedded.size() + 1;
  Matrix out(batch, interaction_width(d, nf));
  std::vector<std::span<const double>> z(nf);
  for (std::size_t s = 0; s < batch; ++s) {
    z[0] = dense.row(s);
    for (std::size_t t = 0; t < embedded.size(); ++t) z[t + 1] = embedded[t].row(s);
    auto o = out.row(s);
    std::copy(z[0].begin(), z[0].end(), o.begin());
    std::size_t col = d;
    for (std::size_t i = 0; i < nf; ++i) {
      for (std::size_t j = i + 1; j < nf; ++j) o[col++] = dot(z[i], z[j]);
    }
  }
  return out;
}

InteractionGrads interact_backward(const Matrix& dense,
                                   std::span<const Matrix> embedded,
                                   const Matrix& grad_out) {
  const std::size_t batch = dense.rows();
  const std::size_t d = dense.cols();
  const std::size_t nf = embedded.size() + 1;
  if (grad_out.rows() != batch || grad_out.cols() != interaction_width(d, nf)) {
    throw Error(ErrorCode::kDimensionMismatch,
                "interact_backward: grad is " + grad_out.shape_string() + ", expected " +
                    std::to_string(batch) + "x" +
                    std::to_string(interaction_width(d, nf)));
  }
  InteractionGrads g;
  g.dense = Matrix(batch, d);
  g.embedded.assign(embedded.size(), Matrix(batch, d));
  std::vector<std::span<const double>> z(nf);
  std::vector<std::span<double>> gz(nf);
  for (std::size_t s = 0; s < batch; ++s) {
    z[0] = dense.row(s);
    gz[0] = g.dense.row(s);
    for (std::size_t t = 0; t < embedded.size(); ++t) {
      z[t + 1] = embedded[t].row(s);
      gz[t + 1] = g.embedded[t].row(s);
    }
    const auto go = grad_out.row(s);
    for (std::size_t c = 0; c < d; ++c) gz[0][c] += go[c];
    std::size_t col = d;
    for (std::size_t i = 0; i < nf; ++i) {
      for (std::size_t j = i + 1; j < nf; ++j) {
        const double gij = go[col++];
        for (std::size_t c = 0; c < d; ++c) {
          gz[i][c] += gij * z[j][c];
          gz[j][c] += gij * z[i][c];
        }
      }
    }
  }
  return g;
}

std::vector<std::size_t> DlrmConfig::top_layer_dims() const {
  std::vector<std::size_t> dims{interaction_dim()};
  dims.insert(dims.end(), top_mlp.begin(), top_mlp.end());
  return dims;
}

void DlrmConfig::validate() const {
  if (sparse_dim == 0) {
    throw Error(ErrorCode::kInvalidArgument, "sparse feature size must be positive");
  }
  for (std::size_t t = 0; t < embedding_sizes.size(); ++t) {
    if (embedding_sizes[t] == 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "embedding table " + std::to_string(t) + " has zero rows");
    }
  }
  if (bottom_mlp.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "bottom MLP needs at least the dense input width");
  }
  for (std::size_t n : bottom_mlp) {
    if (n == 0) throw Error(ErrorCode::kInvalidArgument, "bottom MLP has a zero-width layer");
  }
  if (bottom_mlp.back() != sparse_dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                "bottom MLP output width " + std::to_string(bottom_mlp.back()) +
                    " (arch-mlp-bot=" + dims_string(bottom_mlp) +
                    ") must equal sparse feature size " + std::to_string(sparse_dim));
  }
  if (top_mlp.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "top MLP needs at least one layer");
  }
  for (std::size_t n : top_mlp) {
    if (n == 0) throw Error(ErrorCode::kInvalidArgument, "top MLP has a zero-width layer");
  }
  if (top_mlp.back() != 1) {
    throw Error(ErrorCode::kDimensionMismatch,
                "top MLP must end in a single output, got " + std::to_string(top_mlp.back()));
  }
}

std::uint64_t embedding_param_count(const DlrmConfig& config) {
  std::uint64_t total = 0;
  for (std::size_t m : config.embedding_sizes) {
    total += static_cast<std::uint64_t>(m) * config.sparse_dim;
  }
  return total;
}

std::uint64_t param_count(const DlrmConfig& config) {
  std::uint64_t total = embedding_param_count(config);
  auto mlp = [&](const std::vector<std::size_t>& dims) {
    for (std::size_t l = 1; l < dims.size(); ++l) {
      total += static_cast<std::uint64_t>(dims[l]) * dims[l - 1] + dims[l];
    }
  };
  mlp(config.bottom_mlp);
  if (!config.top_mlp.empty()) mlp(config.top_layer_dims());
  return total;
}

DlrmModel DlrmModel::initialize(const DlrmConfig& config) {
  config.validate();
  DlrmModel model;
  model.config = config;
  const RngStream root(config.seed);
  RngStream bottom_stream = root.fork(1);
  RngStream top_stream = root.fork(2);
  model.bottom = make_mlp(config.bottom_mlp, Activation::kRelu, Activation::kRelu,
                          bottom_stream);
  model.top = make_mlp(config.top_layer_dims(), Activation::kRelu,
                       Activation::kIdentity, top_stream);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.sparse_dim));
  for (std::size_t t = 0; t < config.num_tables(); ++t) {
    RngStream s = root.fork(100 + t);
    Matrix w = rng_uniform(s, config.embedding_sizes[t], config.sparse_dim);
    for (double& v : w.data()) v = bound * (2.0 * v - 1.0);
    model.tables.emplace_back(std::move(w));
  }
  return model;
}

Matrix embed_table(const DlrmModel& model, const SparseBatch& batch,
                   std::size_t table, OpProfiler* profiler) {
  ScopedOp op(profiler, OpCategory::kEmbeddingLookup);
  try {
    return lookup_batch(model.tables.at(table), batch, table);
  } catch (const Error& e) {
    rethrow_with_context(e, "embedding lookup");
  }
}

DlrmOutput dlrm_forward_from_embeddings(const DlrmModel& model,
                                        const Matrix& dense_x,
                                        std::vector<Matrix> embedded,
                                        OpProfiler* profiler) {
  DlrmOutput out;
  try {
    ScopedOp op(profiler, OpCategory::kBottomMlp);
    MlpOutput bottom = mlp_forward(model.bottom, dense_x);
    out.cache.bottom = std::move(bottom.cache);
    out.cache.bottom_out = std::move(bottom.y);
  } catch (const Error& e) {
    rethrow_with_context(e, "bottom MLP");
  }
  out.cache.embedded = std::move(embedded);
  Matrix z;
  try {
    ScopedOp op(profiler, OpCategory::kInteraction);
    z = interact(out.cache.bottom_out, out.cache.embedded);
  } catch (const Error& e) {
    rethrow_with_context(e, "interaction");
  }
  try {
    ScopedOp op(profiler, OpCategory::kTopMlp);
    MlpOutput top = mlp_forward(model.top, z);
    out.cache.top = std::move(top.cache);
    out.cache.logits = std::move(top.y);
  } catch (const Error& e) {
    rethrow_with_context(e, "top MLP");
  }
  ScopedOp op(profiler, OpCategory::kLoss);
  out.probs.resize(out.cache.logits.rows());
  for (std::size_t i = 0; i < out.probs.size(); ++i) {
    out.probs[i] = sigmoid(out.cache.logits(i, 0));
  }
  return out;
}

DlrmOutput dlrm_forward(const DlrmModel& model, const Matrix& dense_x,
                        std::span<const SparseBatch> sparse, OpProfiler* profiler) {
  if (sparse.size() != model.tables.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "dlrm_forward: got " + std::to_string(sparse.size()) +
                    " sparse batches for " + std::to_string(model.tables.size()) +
                    " tables");
  }
  std::vector<Matrix> embedded;
  embedded.reserve(sparse.size());
  for (std::size_t t = 0; t < sparse.size(); ++t) {
    if (sparse[t].batch_size() != dense_x.rows()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "dlrm_forward: table " + std::to_string(t) + " batch has " +
                      std::to_string(sparse[t].batch_size()) + " samples, dense input has " +
                      std::to_string(dense_x.rows()));
    }
    embedded.push_back(embed_table(model, sparse[t], t, profiler));
  }
  return dlrm_forward_from_embeddings(model, dense_x, std::move(embedded), profiler);
}

namespace {

template <class Grads, class MlpBackward>
Grads dense_stage_walk(const DlrmModel& model, const DlrmCache& cache,
                       const Matrix& grad_logits, OpProfiler* profiler,
                       MlpBackward&& mlp_bwd) {
  Grads g;
  {
    ScopedOp op(profiler, OpCategory::kTopMlp);
    g.top = mlp_bwd(model.top, cache.top, grad_logits);
  }
  InteractionGrads ig;
  {
    ScopedOp op(profiler, OpCategory::kInteraction);
    ig = interact_backward(cache.bottom_out, cache.embedded, g.top.input);
  }
  {
    ScopedOp op(profiler, OpCategory::kBottomMlp);
    g.bottom = mlp_bwd(model.bottom, cache.bottom, ig.dense);
  }
  g.embedded = std::move(ig.embedded);
  return g;
}

}  // namespace

DenseStageGrads dense_stage_backward(const DlrmModel& model, const DlrmCache& cache,
                                     const Matrix& grad_logits, Reduction reduction,
                                     OpProfiler* profiler) {
  return dense_stage_walk<DenseStageGrads>(
      model, cache, grad_logits, profiler,
      [&](const MlpParams& p, const MlpCache& c, const Matrix& gy) {
        return mlp_backward(p, c, gy, reduction);
      });
}

DenseStagePartialGrads dense_stage_backward_partial(const DlrmModel& model,
                                                    const DlrmCache& cache,
                                                    const Matrix& grad_logits,
                                                    OpProfiler* profiler) {
  return dense_stage_walk<DenseStagePartialGrads>(
      model, cache, grad_logits, profiler,
      [](const MlpParams& p, const MlpCache& c, const Matrix& gy) {
        return mlp_backward_partial(p, c, gy);
      });
}

DlrmGradients dlrm_backward(const DlrmModel& model, const DlrmCache& cache,
                            std::span<const SparseBatch> sparse,
                            const Matrix& grad_logits, Reduction reduction,
                            OpProfiler* profiler) {
  DenseStageGrads dense = dense_stage_backward(model, cache, grad_logits, reduction, profiler);
  DlrmGradients g;
  g.bottom = std::move(dense.bottom);
  g.top = std::move(dense.top);
  ScopedOp op(profiler, OpCategory::kEmbeddingLookup);
  for (std::size_t t = 0; t < model.tables.size(); ++t) {
    g.tables.push_back(lookup_backward(model.tables[t], sparse[t], dense.embedded[t]));
  }
  return g;
}

namespace {

constexpr double kMinLogProb = -100.0;

}  // namespace

LossTerms bce_terms(std::span<const double> probs, std::span<const double> labels,
                    std::size_t total_batch) {
  if (probs.size() != labels.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "bce: " + std::to_string(probs.size()) + " probabilities vs " +
                    std::to_string(labels.size()) + " labels");
  }
  if (total_batch == 0) throw Error(ErrorCode::kInvalidArgument, "bce: empty batch");
  LossTerms out;
  out.per_sample.resize(probs.size());
  out.grad_logits = Matrix(probs.size(), 1);
  const double scale = static_cast<double>(total_batch);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    const double y = labels[i];
    if (y != 0.0 && y != 1.0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "bce: label " + std::to_string(y) + " at sample " + std::to_string(i) +
                      " is not 0 or 1");
    }
    // A saturated sigmoid returns exactly 0 or 1; the log is floored so
    // the loss stays finite.
    out.per_sample[i] = -std::max(y == 1.0 ? std::log(p) : std::log1p(-p), kMinLogProb);
    out.grad_logits(i, 0) = (p - y) / scale;
  }
  return out;
}

LossResult bce_loss(std::span<const double> probs, std::span<const double> labels,
                    Reduction reduction) {
  if (probs.empty()) throw Error(ErrorCode::kInvalidArgument, "bce: empty batch");
  LossTerms terms = bce_terms(probs, labels, probs.size());
  double sum = 0.0;
  if (reduction == Reduction::kExact) {
    ExactSum acc;
    for (double v : terms.per_sample) acc.add(v);
    sum = acc.value();
  } else {
    for (double v : terms.per_sample) sum += v;
  }
  return {sum / static_cast<double>(probs.size()), std::move(terms.grad_logits)};
}

double accuracy(std::span<const double> probs, std::span<const double> labels) {
  if (probs.size() != labels.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "accuracy: size mismatch");
  }
  if (probs.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    hits += ((probs[i] > 0.5) == (labels[i] == 1.0)) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(probs.size());
}

namespace {

void check_fm(const FmParams& p, std::span<const double> x) {
  if (p.linear.size() != x.size() || p.factors.rows() != x.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "fm: input length " + std::to_string(x.size()) + ", linear length " +
                    std::to_string(p.linear.size()) + ", factors " +
                    p.factors.shape_string());
  }
}

}  // namespace

double fm_predict_naive(const FmParams& p, std::span<const double> x) {
  check_fm(p, x);
  const std::size_t n = x.size();
  Matrix upper(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) upper(i, j) = dot(p.factors.row(i), p.factors.row(j));
  }
  double pairwise = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) pairwise += x[i] * upper(i, j) * x[j];
  }
  return p.bias + dot(p.linear, x) + pairwise;
}

double fm_predict(const FmParams& p, std::span<const double> x) {
  check_fm(p, x);
  const std::size_t d = p.factors.cols();
  double pairwise = 0.0;
  for (std::size_t f = 0; f < d; ++f) {
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double t = p.factors(i, f) * x[i];
      sum += t;
      sum_sq += t * t;
    }
    pairwise += sum * sum - sum_sq;
  }
  return p.bias + dot(p.linear, x) + 0.5 * pairwise;
}

}  // namespace dlrm
