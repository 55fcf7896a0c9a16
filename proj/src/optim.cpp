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

#include "dlrm/optim.hpp"

#include <cmath>

#include "dlrm/error.hpp"

namespace dlrm {

namespace {

void check_lengths(const char* op, std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(op) + ": parameter length " + std::to_string(a) +
                    " vs gradient length " + std::to_string(b));
  }
}

void check_sparse(const char* op, const EmbeddingTable& table, const SparseRowGrad& grad) {
  if (grad.values.cols() != table.dim() || grad.values.rows() != grad.rows.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(op) + ": sparse gradient " + grad.values.shape_string() +
                    " does not fit table of width " + std::to_string(table.dim()));
  }
  for (RowIndex r : grad.rows) {
    if (r < 0 || static_cast<std::size_t>(r) >= table.num_rows()) {
      throw Error(ErrorCode::kOutOfRange,
                  std::string(op) + ": gradient row " + std::to_string(r) +
                      " outside table of " + std::to_string(table.num_rows()) + " rows");
    }
  }
}

void adagrad_kernel(double* theta, const double* g, double* acc, std::size_t n,
                    double lr, double eps) {
  for (std::size_t i = 0; i < n; ++i) {
    if (g[i] == 0.0) continue;
    acc[i] += g[i] * g[i];
    theta[i] -= lr * g[i] / (std::sqrt(acc[i]) + eps);
  }
}

}  // namespace

void sgd_step(std::span<double> params, std::span<const double> grads, double lr) {
  check_lengths("sgd_step", params.size(), grads.size());
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

void sgd_step(EmbeddingTable& table, const SparseRowGrad& grad, double lr) {
  check_sparse("sgd_step", table, grad);
  for (std::size_t i = 0; i < grad.rows.size(); ++i) {
    auto row = table.weights().row(static_cast<std::size_t>(grad.rows[i]));
    const auto g = grad.values.row(i);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] -= lr * g[c];
  }
}

void adagrad_step(std::span<double> params, std::span<const double> grads,
                  std::span<double> accumulator, double lr, double eps) {
  check_lengths("adagrad_step", params.size(), grads.size());
  check_lengths("adagrad_step", params.size(), accumulator.size());
  if (eps < 0.0) throw Error(ErrorCode::kInvalidArgument, "adagrad_step: negative eps");
  adagrad_kernel(params.data(), grads.data(), accumulator.data(), params.size(), lr, eps);
}

void adagrad_step(EmbeddingTable& table, const SparseRowGrad& grad,
                  Matrix& accumulator, double lr, double eps) {
  check_sparse("adagrad_step", table, grad);
  if (accumulator.rows() != table.num_rows() || accumulator.cols() != table.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "adagrad_step: accumulator " + accumulator.shape_string() +
                    " does not match table " + table.weights().shape_string());
  }
  if (eps < 0.0) throw Error(ErrorCode::kInvalidArgument, "adagrad_step: negative eps");
  for (std::size_t i = 0; i < grad.rows.size(); ++i) {
    const auto r = static_cast<std::size_t>(grad.rows[i]);
    adagrad_kernel(table.weights().row(r).data(), grad.values.row(i).data(),
                   accumulator.row(r).data(), table.dim(), lr, eps);
  }
}

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kSgd ? "sgd" : "adagrad";
}

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adagrad") return OptimizerKind::kAdagrad;
  throw Error(ErrorCode::kParse, "unknown optimizer '" + name + "' (expected sgd|adagrad)");
}

AdagradState AdagradState::zeros_like(const DlrmModel& model) {
  AdagradState s;
  for (const auto& layer : model.bottom.layers) {
    s.bottom_weights.emplace_back(layer.weight.rows(), layer.weight.cols());
    s.bottom_biases.emplace_back(layer.bias.size(), 0.0);
  }
  for (const auto& layer : model.top.layers) {
    s.top_weights.emplace_back(layer.weight.rows(), layer.weight.cols());
    s.top_biases.emplace_back(layer.bias.size(), 0.0);
  }
  for (const auto& table : model.tables) s.tables.emplace_back(table.num_rows(), table.dim());
  return s;
}

Optimizer::Optimizer(OptimizerKind kind, double lr, double eps)
    : kind_(kind), lr_(lr), eps_(eps) {
  if (!(lr >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "learning rate must be >= 0");
  if (eps < 0.0) throw Error(ErrorCode::kInvalidArgument, "adagrad eps must be >= 0");
}

void Optimizer::prepare(const DlrmModel& model) {
  if (kind_ == OptimizerKind::kAdagrad && !prepared_) {
    state_ = AdagradState::zeros_like(model);
  }
  prepared_ = true;
}

void Optimizer::apply_mlp(MlpParams& mlp, const MlpGrads& grads, bool is_top) {
  if (grads.weights.size() != mlp.layers.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "optimizer: gradient/MLP layer count mismatch");
  }
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    auto& layer = mlp.layers[l];
    if (grads.weights[l].rows() != layer.weight.rows() ||
        grads.weights[l].cols() != layer.weight.cols()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "optimizer: weight gradient " + grads.weights[l].shape_string() +
                      " vs parameter " + layer.weight.shape_string());
    }
    if (kind_ == OptimizerKind::kSgd) {
      sgd_step(layer.weight.data(), grads.weights[l].data(), lr_);
      sgd_step(layer.bias, grads.biases[l], lr_);
    } else {
      auto& w_acc = is_top ? state_.top_weights : state_.bottom_weights;
      auto& b_acc = is_top ? state_.top_biases : state_.bottom_biases;
      adagrad_step(layer.weight.data(), grads.weights[l].data(), w_acc.at(l).data(), lr_, eps_);
      adagrad_step(layer.bias, grads.biases[l], b_acc.at(l), lr_, eps_);
    }
  }
}

void Optimizer::apply_table(EmbeddingTable& table, std::size_t table_id,
                            const SparseRowGrad& grad) {
  if (kind_ == OptimizerKind::kSgd) {
    sgd_step(table, grad, lr_);
  } else {
    adagrad_step(table, grad, state_.tables.at(table_id), lr_, eps_);
  }
}

void Optimizer::apply(DlrmModel& model, const DlrmGradients& grads) {
  prepare(model);
  apply_mlp(model.bottom, grads.bottom, false);
  apply_mlp(model.top, grads.top, true);
  if (grads.tables.size() != model.tables.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "optimizer: gradient/table count mismatch");
  }
  for (std::size_t t = 0; t < model.tables.size(); ++t) {
    apply_table(model.tables[t], t, grads.tables[t]);
  }
}

}  // namespace dlrm
