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

// SGD and Adagrad. Dense parameters are updated elementwise; embedding tables
// receive row-sparse updates that touch only rows present in the gradient.

#ifndef DLRM_OPTIM_HPP_
#define DLRM_OPTIM_HPP_

#include <span>
#include <string>
#include <vector>

#include "dlrm/dense.hpp"
#include "dlrm/embedding.hpp"
#include "dlrm/model.hpp"

namespace dlrm {

inline constexpr double kDefaultLearningRate = 0.1;
inline constexpr double kDefaultAdagradEps = 1e-10;

// theta -= lr * g
void sgd_step(std::span<double> params, std::span<const double> grads, double lr);
void sgd_step(EmbeddingTable& table, const SparseRowGrad& grad, double lr);

// G += g^2; theta -= lr * g / (sqrt(G) + eps). Elements with g == 0 are left
// untouched, which also keeps a fresh accumulator with eps == 0 finite.
void adagrad_step(std::span<double> params, std::span<const double> grads,
                  std::span<double> accumulator, double lr, double eps);
void adagrad_step(EmbeddingTable& table, const SparseRowGrad& grad,
                  Matrix& accumulator, double lr, double eps);

enum class OptimizerKind { kSgd, kAdagrad };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& name);

// Adagrad accumulators shaped like a model's parameters.
struct AdagradState {
  std::vector<Matrix> bottom_weights;
  std::vector<std::vector<double>> bottom_biases;
  std::vector<Matrix> top_weights;
  std::vector<std::vector<double>> top_biases;
  std::vector<Matrix> tables;

  static AdagradState zeros_like(const DlrmModel& model);
  bool operator==(const AdagradState&) const = default;
};

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, double eps = kDefaultAdagradEps);

  OptimizerKind kind() const noexcept { return kind_; }
  double learning_rate() const noexcept { return lr_; }

  // Applies every gradient in `grads` to `model`.
  void apply(DlrmModel& model, const DlrmGradients& grads);

  // Pieces of apply() for callers that own only part of a model.
  void apply_mlp(MlpParams& mlp, const MlpGrads& grads, bool is_top);
  void apply_table(EmbeddingTable& table, std::size_t table_id,
                   const SparseRowGrad& grad);

  // Allocates Adagrad state for `model` if it does not exist yet.
  void prepare(const DlrmModel& model);
  const AdagradState& state() const noexcept { return state_; }

 private:
  OptimizerKind kind_;
  double lr_;
  double eps_;
  bool prepared_ = false;
  AdagradState state_;
};

}  // namespace dlrm

#endif  // DLRM_OPTIM_HPP_
