// Copyright 2026 The poxbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Multinomial logistic regression with an L1 penalty, trained by SAGA.
//
// Objective: (1/n) sum_i CE(softmax(x_i W + b), y_i) + ||W||_1 / (C n),
// where C is the inverse regularization strength. The bias is not penalized.

#include <cmath>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "poxbench/core.hpp"
#include "poxbench/training.hpp"

namespace poxbench {

struct LogRegConfig {
  double inv_reg_strength = 0.1;
  int max_iter = 326;  // epochs
  double tol = 1e-4;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(inv_reg_strength > 0.0)) throw Error(ErrorKind::kConfig, "inv_reg_strength must be > 0");
    if (max_iter < 1) throw Error(ErrorKind::kConfig, "max_iter must be >= 1");
    if (!(tol > 0.0)) throw Error(ErrorKind::kConfig, "tol must be > 0");
  }

  std::string describe() const {
    return fmt::format("logreg penalty=l1 C={} solver=saga max_iter={} tol={} class_weight=uniform seed={}",
                       inv_reg_strength, max_iter, tol, seed);
  }
};

struct LinearModel {
  MatrixD W;             // d x C
  Eigen::VectorXd b;     // C
  std::vector<int> classes;
  LogRegConfig config;
  int epochs = 0;        // epochs run, rejected ones included
  bool converged = false;
  std::vector<double> objective_history;  // initial value, then one per accepted epoch

  std::size_t dim() const { return static_cast<std::size_t>(W.rows()); }

  template <typename Scalar>
  MatrixD decision_function(const SampleMatrix<Scalar>& X) const {
    check_prediction_input(X, dim());
    MatrixD z = X.template cast<double>() * W;
    z.rowwise() += b.transpose();
    return z;
  }

  template <typename Scalar>
  std::vector<int> predict(const SampleMatrix<Scalar>& X) const {
    std::vector<int> out;
    for (auto j : argmax_rows(decision_function(X))) out.push_back(classes[j]);
    return out;
  }

  std::size_t zero_weights() const { return static_cast<std::size_t>((W.array() == 0.0).count()); }
};

namespace detail {

/// Full regularized objective.
template <typename Scalar>
double logreg_objective(const SampleMatrix<Scalar>& X, const std::vector<int>& yi, const MatrixD& W,
                        const Eigen::VectorXd& b, double lambda) {
  const auto n = static_cast<std::size_t>(X.rows());
  Eigen::RowVectorXd x(X.cols());
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x = X.row(static_cast<Eigen::Index>(i)).template cast<double>();
    const Eigen::RowVectorXd z = x * W + b.transpose();
    const double m = z.maxCoeff();
    loss += m + std::log((z.array() - m).exp().sum()) - z(yi[i]);
  }
  return loss / static_cast<double>(n) + lambda * W.cwiseAbs().sum();
}

inline void soft_threshold(MatrixD& W, double t) {
  W = W.unaryExpr([t](double w) { return w > t ? w - t : (w < -t ? w + t : 0.0); });
}

}  // namespace detail

/// SAGA with the gradient table initialised by one full pass at zero weights.
/// An epoch whose objective rises is undone and the step size halved, so the
/// recorded objective history never increases.
template <typename Scalar>
LinearModel train_logreg(const SampleMatrix<Scalar>& X, const std::vector<int>& y, const LogRegConfig& cfg) {
  cfg.validate();
  LinearModel model;
  model.config = cfg;
  model.classes = check_training_input(X, y);
  const auto yi = encode_labels(y, model.classes);
  const auto n = static_cast<std::size_t>(X.rows());
  const Eigen::Index d = X.cols();
  const auto C = static_cast<Eigen::Index>(model.classes.size());
  const double inv_n = 1.0 / static_cast<double>(n);
  const double lambda = 1.0 / (cfg.inv_reg_strength * static_cast<double>(n));

  double max_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    max_sq = std::max(max_sq, X.row(static_cast<Eigen::Index>(i)).template cast<double>().squaredNorm());
  }
  double step = 1.0 / (3.0 * 0.5 * (max_sq + 1.0));

  MatrixD W = MatrixD::Zero(d, C);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(C);
  MatrixD memory(static_cast<Eigen::Index>(n), C);  // per-sample dLoss/dz
  MatrixD avg_W = MatrixD::Zero(d, C);
  Eigen::VectorXd avg_b = Eigen::VectorXd::Zero(C);
  Eigen::RowVectorXd x(d);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::RowVectorXd g = Eigen::RowVectorXd::Constant(C, 1.0 / static_cast<double>(C));
    g(yi[i]) -= 1.0;
    memory.row(static_cast<Eigen::Index>(i)) = g;
    x = X.row(static_cast<Eigen::Index>(i)).template cast<double>();
    avg_W.noalias() += inv_n * x.transpose() * g;
    avg_b += inv_n * g.transpose();
  }

  double objective = detail::logreg_objective(X, yi, W, b, lambda);
  model.objective_history.push_back(objective);
  Rng rng(cfg.seed, {0x73616761ULL});

  for (int epoch = 0; epoch < cfg.max_iter; ++epoch) {
    ++model.epochs;
    const MatrixD W0 = W, memory0 = memory, avg_W0 = avg_W;
    const Eigen::VectorXd b0 = b, avg_b0 = avg_b;
    for (std::size_t s = 0; s < n; ++s) {
      const auto i = static_cast<std::size_t>(rng.below(n));
      x = X.row(static_cast<Eigen::Index>(i)).template cast<double>();
      Eigen::RowVectorXd z = x * W + b.transpose();
      const double m = z.maxCoeff();
      z = (z.array() - m).exp();
      z /= z.sum();
      z(yi[i]) -= 1.0;
      const Eigen::RowVectorXd diff = z - memory.row(static_cast<Eigen::Index>(i));
      // Gradient step, proximal L1 step and running-average update in one pass.
      const double shrink = step * lambda;
      for (Eigen::Index j = 0; j < d; ++j) {
        const double xj = x(j);
        double* w = W.row(j).data();
        double* a = avg_W.row(j).data();
        for (Eigen::Index c = 0; c < C; ++c) {
          const double g = xj * diff(c);
          const double v = w[c] - step * (g + a[c]);
          w[c] = std::copysign(std::max(std::abs(v) - shrink, 0.0), v);
          a[c] += inv_n * g;
        }
      }
      b -= step * (diff.transpose() + avg_b);
      avg_b += inv_n * diff.transpose();
      memory.row(static_cast<Eigen::Index>(i)) = z;
    }

    const double next = detail::logreg_objective(X, yi, W, b, lambda);
    if (!std::isfinite(next)) throw Error(ErrorKind::kTraining, "SAGA objective became non-finite");
    if (next > objective) {
      W = W0;
      b = b0;
      memory = memory0;
      avg_W = avg_W0;
      avg_b = avg_b0;
      step *= 0.5;
      continue;
    }
    const double change = std::max((W - W0).cwiseAbs().maxCoeff(), (b - b0).cwiseAbs().maxCoeff());
    const double scale = std::max(W.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
    objective = next;
    model.objective_history.push_back(objective);
    if (change <= cfg.tol * scale) {
      model.converged = true;
      break;
    }
  }
  model.W = std::move(W);
  model.b = std::move(b);
  return model;
}

}  // namespace poxbench
