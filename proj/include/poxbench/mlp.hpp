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

// Feed-forward network: logistic-sigmoid hidden layers, softmax output,
// mini-batch Adam. Parameters live in one flat vector, layer by layer, each
// layer as its row-major (in x out) weight block followed by its bias.
//
// Batch loss: mean cross-entropy + alpha / (2 B) * sum of squared weights
// (biases excluded), B being the batch size.

#include <cmath>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "poxbench/core.hpp"
#include "poxbench/training.hpp"

namespace poxbench {

struct MlpConfig {
  std::vector<int> hidden = {100};
  double l2_alpha = 0.05;
  double learning_rate = 1e-3;  // base rate of the inverse-scaling schedule
  double power_t = 0.5;         // rate at epoch t is learning_rate / t^power_t
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_epochs = 200;
  int batch_size = 0;           // 0 means min(200, n)
  double tol = 1e-4;
  int n_iter_no_change = 10;
  std::uint64_t seed = 0;

  void validate() const {
    if (hidden.empty()) throw Error(ErrorKind::kConfig, "MLP needs at least one hidden layer");
    for (int h : hidden) {
      if (h < 1) throw Error(ErrorKind::kConfig, "hidden layer sizes must be >= 1");
    }
    if (l2_alpha < 0.0) throw Error(ErrorKind::kConfig, "l2_alpha must be >= 0");
    if (!(learning_rate > 0.0)) throw Error(ErrorKind::kConfig, "learning_rate must be > 0");
    if (max_epochs < 0) throw Error(ErrorKind::kConfig, "max_epochs must be >= 0");
    if (batch_size < 0) throw Error(ErrorKind::kConfig, "batch_size must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
      throw Error(ErrorKind::kConfig, "Adam betas must lie in [0, 1)");
    }
  }

  std::string describe() const {
    return fmt::format(
        "mlp hidden=({}) activation=logistic alpha={} solver=adam lr={} schedule=invscaling power_t={} "
        "beta1={} beta2={} eps={} max_epochs={} batch={} tol={} seed={}",
        fmt::join(hidden, ","), l2_alpha, learning_rate, power_t, beta1, beta2, epsilon, max_epochs,
        batch_size == 0 ? std::string("min(200,n)") : std::to_string(batch_size), tol, seed);
  }
};

/// Layer sizes [d, hidden..., C] plus the parameter vector.
struct MlpModel {
  std::vector<int> layers;
  Eigen::VectorXd params;
  std::vector<int> classes;
  MlpConfig config;
  int epochs = 0;
  double initial_loss = 0.0;       // full-data loss at initialisation
  std::vector<double> loss_curve;  // mean training loss per epoch

  std::size_t num_layers() const { return layers.size() - 1; }
  std::size_t dim() const { return static_cast<std::size_t>(layers.front()); }

  std::size_t weight_offset(std::size_t l) const {
    std::size_t off = 0;
    for (std::size_t k = 0; k < l; ++k) off += static_cast<std::size_t>(layers[k] + 1) * layers[k + 1];
    return off;
  }
  Eigen::Map<const MatrixD> weight(std::size_t l) const {
    return {params.data() + weight_offset(l), layers[l], layers[l + 1]};
  }
  Eigen::Map<const Eigen::RowVectorXd> bias(std::size_t l) const {
    return {params.data() + weight_offset(l) + static_cast<std::size_t>(layers[l]) * layers[l + 1], layers[l + 1]};
  }

  /// Softmax class probabilities.
  template <typename Scalar>
  MatrixD predict_proba(const SampleMatrix<Scalar>& X) const {
    check_prediction_input(X, dim());
    MatrixD a = X.template cast<double>();
    for (std::size_t l = 0; l < num_layers(); ++l) {
      MatrixD z = a * weight(l);
      z.rowwise() += bias(l);
      if (l + 1 < num_layers()) {
        a = z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
      } else {
        softmax_rows(z);
        a = std::move(z);
      }
    }
    return a;
  }

  template <typename Scalar>
  std::vector<int> predict(const SampleMatrix<Scalar>& X) const {
    std::vector<int> out;
    for (auto j : argmax_rows(predict_proba(X))) out.push_back(classes[j]);
    return out;
  }
};

inline std::size_t mlp_param_count(const std::vector<int>& layers) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) n += static_cast<std::size_t>(layers[l] + 1) * layers[l + 1];
  return n;
}

/// Loss of `params` on (X, y) with y already encoded as 0..C-1; fills `grad`
/// when non-null.
inline double mlp_loss_and_gradient(const std::vector<int>& layers, const Eigen::VectorXd& params, const MatrixD& X,
                                    const std::vector<int>& y, double alpha, Eigen::VectorXd* grad = nullptr) {
  const std::size_t L = layers.size() - 1;
  const auto B = static_cast<double>(X.rows());
  std::vector<std::size_t> offset(L + 1, 0);
  for (std::size_t l = 0; l < L; ++l) offset[l + 1] = offset[l] + static_cast<std::size_t>(layers[l] + 1) * layers[l + 1];
  auto W = [&](std::size_t l) { return Eigen::Map<const MatrixD>(params.data() + offset[l], layers[l], layers[l + 1]); };
  auto bvec = [&](std::size_t l) {
    return Eigen::Map<const Eigen::RowVectorXd>(params.data() + offset[l] + static_cast<std::size_t>(layers[l]) * layers[l + 1],
                                                layers[l + 1]);
  };

  std::vector<MatrixD> act(L + 1);
  act[0] = X;
  double loss = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    MatrixD z = act[l] * W(l);
    z.rowwise() += bvec(l);
    if (l + 1 < L) {
      act[l + 1] = z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    } else {
      for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double m = z.row(i).maxCoeff();
        const double lse = m + std::log((z.row(i).array() - m).exp().sum());
        loss -= z(i, y[static_cast<std::size_t>(i)]) - lse;
        z.row(i) = (z.row(i).array() - lse).exp();
      }
      act[l + 1] = std::move(z);
    }
  }
  double sq = 0.0;
  for (std::size_t l = 0; l < L; ++l) sq += W(l).squaredNorm();
  loss = loss / B + alpha / (2.0 * B) * sq;

  if (grad) {
    grad->resize(params.size());
    MatrixD delta = act[L];
    for (Eigen::Index i = 0; i < delta.rows(); ++i) delta(i, y[static_cast<std::size_t>(i)]) -= 1.0;
    delta /= B;
    for (std::size_t l = L; l-- > 0;) {
      Eigen::Map<MatrixD> gW(grad->data() + offset[l], layers[l], layers[l + 1]);
      Eigen::Map<Eigen::RowVectorXd> gb(grad->data() + offset[l] + static_cast<std::size_t>(layers[l]) * layers[l + 1],
                                        layers[l + 1]);
      gW.noalias() = act[l].transpose() * delta;
      gW += (alpha / B) * W(l);
      gb = delta.colwise().sum();
      if (l > 0) {
        MatrixD back = delta * W(l).transpose();
        delta = back.array() * act[l].array() * (1.0 - act[l].array());
      }
    }
  }
  return loss;
}

/// Glorot-style uniform initialisation with the logistic-activation factor:
/// U(-r, r), r = sqrt(2 / (fan_in + fan_out)), biases included.
inline MlpModel mlp_initialize(int d, const std::vector<int>& classes, const MlpConfig& cfg) {
  cfg.validate();
  MlpModel m;
  m.config = cfg;
  m.classes = classes;
  m.layers.push_back(d);
  for (int h : cfg.hidden) m.layers.push_back(h);
  m.layers.push_back(static_cast<int>(classes.size()));
  m.params.resize(static_cast<Eigen::Index>(mlp_param_count(m.layers)));
  Rng rng(cfg.seed, {0x696e6974ULL});
  std::size_t k = 0;
  for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) {
    const double r = std::sqrt(2.0 / (m.layers[l] + m.layers[l + 1]));
    const std::size_t count = static_cast<std::size_t>(m.layers[l] + 1) * m.layers[l + 1];
    for (std::size_t j = 0; j < count; ++j, ++k) m.params(static_cast<Eigen::Index>(k)) = rng.uniform(-r, r);
  }
  return m;
}

template <typename Scalar>
MlpModel train_mlp(const SampleMatrix<Scalar>& X, const std::vector<int>& y, const MlpConfig& cfg) {
  cfg.validate();
  const auto classes = check_training_input(X, y);
  const auto yi = encode_labels(y, classes);
  const MatrixD Xd = X.template cast<double>();
  const auto n = static_cast<std::size_t>(X.rows());
  MlpModel m = mlp_initialize(static_cast<int>(X.cols()), classes, cfg);
  m.initial_loss = mlp_loss_and_gradient(m.layers, m.params, Xd, yi, cfg.l2_alpha);

  const std::size_t batch = cfg.batch_size == 0 ? std::min<std::size_t>(200, n)
                                                : std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);
  Eigen::VectorXd mom = Eigen::VectorXd::Zero(m.params.size());
  Eigen::VectorXd vel = Eigen::VectorXd::Zero(m.params.size());
  Eigen::VectorXd grad;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(cfg.seed, {0x736875666cULL});
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  long step = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(order);
    const double lr = cfg.learning_rate / std::pow(static_cast<double>(epoch), cfg.power_t);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      MatrixD xb(static_cast<Eigen::Index>(stop - start), Xd.cols());
      std::vector<int> yb(stop - start);
      for (std::size_t r = start; r < stop; ++r) {
        xb.row(static_cast<Eigen::Index>(r - start)) = Xd.row(static_cast<Eigen::Index>(order[r]));
        yb[r - start] = yi[order[r]];
      }
      const double loss = mlp_loss_and_gradient(m.layers, m.params, xb, yb, cfg.l2_alpha, &grad);
      if (!std::isfinite(loss) || !grad.allFinite()) {
        throw Error(ErrorKind::kTraining,
                    fmt::format("MLP diverged at epoch {} (batch loss {}, lr {}, |params|max {})", epoch, loss, lr,
                                m.params.cwiseAbs().maxCoeff()));
      }
      epoch_loss += loss * static_cast<double>(stop - start);
      ++step;
      mom = cfg.beta1 * mom + (1.0 - cfg.beta1) * grad;
      vel = cfg.beta2 * vel + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
      const double lr_t = lr * std::sqrt(1.0 - std::pow(cfg.beta2, static_cast<double>(step))) /
                          (1.0 - std::pow(cfg.beta1, static_cast<double>(step)));
      m.params.array() -= lr_t * mom.array() / (vel.array().sqrt() + cfg.epsilon);
    }
    epoch_loss /= static_cast<double>(n);
    m.loss_curve.push_back(epoch_loss);
    m.epochs = epoch;
    stale = epoch_loss > best - cfg.tol ? stale + 1 : 0;
    best = std::min(best, epoch_loss);
    if (stale > cfg.n_iter_no_change) break;
  }
  return m;
}

}  // namespace poxbench
