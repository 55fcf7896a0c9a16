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

// The DLRM network: bottom MLP over dense features, per-table embedding
// lookups, pairwise dot-product interaction, top MLP and a sigmoid output,
// trained with binary cross-entropy. A factorization-machine predictor is
// kept alongside as the reference form of the pairwise interaction.

#ifndef DLRM_MODEL_HPP_
#define DLRM_MODEL_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dlrm/dense.hpp"
#include "dlrm/embedding.hpp"
#include "dlrm/exact_sum.hpp"
#include "dlrm/profiler.hpp"

namespace dlrm {

// How reductions over the batch dimension are evaluated. kOrdered sums in
// ascending sample order in double precision. kExact rounds once from an
// exact accumulator, which makes the result independent of how the batch is
// sharded; data-parallel runs require it.
enum class Reduction { kOrdered, kExact };

// ---------------------------------------------------------------------------
// MLP

struct DenseLayer {
  Matrix weight;  // n_out x n_in
  std::vector<double> bias;
  Activation activation = Activation::kRelu;

  bool operator==(const DenseLayer&) const = default;
};

struct MlpParams {
  std::vector<DenseLayer> layers;

  // Width of the input; only meaningful for a non-empty MLP.
  std::size_t input_dim() const;
  std::size_t output_dim() const;
  // Throws kDimensionMismatch when consecutive layers do not chain.
  void validate() const;

  bool operator==(const MlpParams&) const = default;
};

// Layers n_0 -> n_1 -> ... -> n_k with `hidden` on all but the last layer.
// Weights ~ N(0, 2 / (n_in + n_out)), biases zero.
MlpParams make_mlp(std::span<const std::size_t> dims, Activation hidden,
                   Activation last, RngStream& stream);

struct MlpCache {
  std::vector<Matrix> inputs;           // input to each layer
  std::vector<Matrix> pre_activations;  // W x + b of each layer
};

struct MlpOutput {
  Matrix y;
  MlpCache cache;
};

MlpOutput mlp_forward(const MlpParams& p, const Matrix& x);

struct MlpGrads {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  Matrix input;  // gradient with respect to x
};

// Unrounded per-shard parameter gradients, ready to be merged across replicas.
struct MlpPartialGrads {
  std::vector<ExactMatrix> weights;
  std::vector<ExactMatrix> biases;  // 1 x n_out each
  Matrix input;

  void merge(const MlpPartialGrads& other);
  MlpGrads rounded() const;
  std::size_t wire_bytes() const;
};

MlpGrads mlp_backward(const MlpParams& p, const MlpCache& cache,
                      const Matrix& grad_y,
                      Reduction reduction = Reduction::kOrdered);

MlpPartialGrads mlp_backward_partial(const MlpParams& p, const MlpCache& cache,
                                     const Matrix& grad_y);

// ---------------------------------------------------------------------------
// Interaction

// d + n_f (n_f - 1) / 2 for n_f interacting features of width d.
std::size_t interaction_width(std::size_t dim, std::size_t num_features);

// Per sample: [dense, z_i . z_j for 0 <= i < j < n_f] with z_0 = dense and
// z_1.. the embedding outputs. Pairs are ordered row-major over (i, j).
Matrix interact(const Matrix& dense, std::span<const Matrix> embedded);

struct InteractionGrads {
  Matrix dense;
  std::vector<Matrix> embedded;
};

InteractionGrads interact_backward(const Matrix& dense,
                                   std::span<const Matrix> embedded,
                                   const Matrix& grad_out);

// ---------------------------------------------------------------------------
// Full model

enum class InteractionKind { kDot };

struct DlrmConfig {
  std::vector<std::size_t> embedding_sizes;  // rows per table
  std::size_t sparse_dim = 0;
  // Dense input width followed by each bottom layer's width; the last entry
  // must equal sparse_dim.
  std::vector<std::size_t> bottom_mlp;
  // Output width of each top layer; the input width is derived from the
  // interaction and the last entry must be 1.
  std::vector<std::size_t> top_mlp;
  InteractionKind interaction = InteractionKind::kDot;
  std::uint64_t seed = 0;

  std::size_t num_tables() const { return embedding_sizes.size(); }
  std::size_t num_features() const { return embedding_sizes.size() + 1; }
  std::size_t dense_dim() const { return bottom_mlp.empty() ? 0 : bottom_mlp.front(); }
  std::size_t interaction_dim() const {
    return interaction_width(sparse_dim, num_features());
  }
  // Full dimension chain of the top MLP, starting at interaction_dim().
  std::vector<std::size_t> top_layer_dims() const;

  // Throws kInvalidArgument / kDimensionMismatch naming the violated constraint.
  void validate() const;

  bool operator==(const DlrmConfig&) const = default;
};

// Number of trainable parameters, computed from the config alone.
std::uint64_t param_count(const DlrmConfig& config);
// Embedding-table share of param_count.
std::uint64_t embedding_param_count(const DlrmConfig& config);

struct DlrmModel {
  DlrmConfig config;
  MlpParams bottom;
  MlpParams top;
  std::vector<EmbeddingTable> tables;

  // Relu MLPs (the last top layer is linear; the sigmoid is applied by the
  // model) and embedding rows ~ U(-1/sqrt(d), 1/sqrt(d)), seeded by
  // config.seed.
  static DlrmModel initialize(const DlrmConfig& config);

  bool operator==(const DlrmModel&) const = default;
};

struct DlrmCache {
  MlpCache bottom;
  Matrix bottom_out;
  std::vector<Matrix> embedded;
  MlpCache top;
  Matrix logits;  // batch x 1
};

struct DlrmOutput {
  std::vector<double> probs;
  DlrmCache cache;
};

DlrmOutput dlrm_forward(const DlrmModel& model, const Matrix& dense_x,
                        std::span<const SparseBatch> sparse,
                        OpProfiler* profiler = nullptr);

// Stages of dlrm_forward for callers that split the model across devices.
Matrix embed_table(const DlrmModel& model, const SparseBatch& batch,
                   std::size_t table, OpProfiler* profiler = nullptr);
DlrmOutput dlrm_forward_from_embeddings(const DlrmModel& model,
                                        const Matrix& dense_x,
                                        std::vector<Matrix> embedded,
                                        OpProfiler* profiler = nullptr);

struct DlrmGradients {
  MlpGrads bottom;
  MlpGrads top;
  std::vector<SparseRowGrad> tables;
};

// Gradients of the dense stages plus the gradient of each embedding output.
struct DenseStageGrads {
  MlpGrads bottom;
  MlpGrads top;
  std::vector<Matrix> embedded;
};

struct DenseStagePartialGrads {
  MlpPartialGrads bottom;
  MlpPartialGrads top;
  std::vector<Matrix> embedded;
};

DenseStageGrads dense_stage_backward(const DlrmModel& model,
                                     const DlrmCache& cache,
                                     const Matrix& grad_logits,
                                     Reduction reduction,
                                     OpProfiler* profiler = nullptr);

DenseStagePartialGrads dense_stage_backward_partial(const DlrmModel& model,
                                                    const DlrmCache& cache,
                                                    const Matrix& grad_logits,
                                                    OpProfiler* profiler = nullptr);

DlrmGradients dlrm_backward(const DlrmModel& model, const DlrmCache& cache,
                            std::span<const SparseBatch> sparse,
                            const Matrix& grad_logits,
                            Reduction reduction = Reduction::kOrdered,
                            OpProfiler* profiler = nullptr);

// ---------------------------------------------------------------------------
// Loss

struct LossTerms {
  std::vector<double> per_sample;  // -[y ln p + (1-y) ln(1-p)]
  Matrix grad_logits;              // (p - y) / total_batch, batch x 1
};

// Per-sample terms for a shard of a batch of `total_batch` samples.
LossTerms bce_terms(std::span<const double> probs, std::span<const double> labels,
                    std::size_t total_batch);

struct LossResult {
  double loss = 0.0;
  Matrix grad_logits;
};

// Mean binary cross-entropy and its gradient with respect to the logits.
LossResult bce_loss(std::span<const double> probs, std::span<const double> labels,
                    Reduction reduction = Reduction::kOrdered);

// Fraction of samples where (p > 0.5) agrees with the label.
double accuracy(std::span<const double> probs, std::span<const double> labels);

// ---------------------------------------------------------------------------
// Factorization machine

struct FmParams {
  double bias = 0.0;
  std::vector<double> linear;  // n
  Matrix factors;              // n x d
};

// b + w.x + x^T upper(V V^T) x, materializing the strictly upper triangle.
double fm_predict_naive(const FmParams& p, std::span<const double> x);

// Same value in O(n d): b + w.x + (||V^T x||^2 - sum_i x_i^2 ||v_i||^2) / 2.
double fm_predict(const FmParams& p, std::span<const double> x);

}  // namespace dlrm

#endif  // DLRM_MODEL_HPP_
