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

// C-SVM with a sigmoid kernel, K(x, z) = tanh(gamma <x, z> + coef0).
// Binary problems are solved on the dual by SMO with second-order working
// set selection; multi-class prediction is one-vs-one voting.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "poxbench/core.hpp"
#include "poxbench/training.hpp"

namespace poxbench {

struct SvmConfig {
  double C = 100.0;
  double gamma = 0.0;  // <= 0 means 1 / number of features
  double coef0 = 0.0;
  int degree = 2;      // carried for completeness; tanh kernels ignore it
  double tol = 1e-3;
  long max_iter = 10'000'000;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(C > 0.0)) throw Error(ErrorKind::kConfig, "SVM C must be > 0");
    if (!(tol > 0.0)) throw Error(ErrorKind::kConfig, "SVM tol must be > 0");
    if (max_iter < 1) throw Error(ErrorKind::kConfig, "SVM max_iter must be >= 1");
  }

  double gamma_for(std::size_t d) const { return gamma > 0.0 ? gamma : 1.0 / static_cast<double>(d); }

  std::string describe() const {
    return fmt::format("svm kernel=sigmoid C={} gamma={} coef0={} degree={} (inert) tol={} max_iter={} seed={}", C,
                       gamma > 0.0 ? fmt::format("{}", gamma) : std::string("1/d"), coef0, degree, tol, max_iter, seed);
  }
};

/// Dual solution of one binary problem with labels +1 / -1. The decision
/// value is sum_j alpha_j y_j K(x_j, x) - rho.
struct BinarySvmSolution {
  std::vector<double> alpha;
  double rho = 0.0;
  long iterations = 0;
  bool converged = false;
};

/// SMO on min 0.5 a'Qa - e'a, 0 <= a <= C, y'a = 0 with Q_ij = y_i y_j K_ij.
inline BinarySvmSolution solve_binary_svm(const MatrixD& K, const std::vector<int>& y, double C, double tol,
                                          long max_iter = 10'000'000) {
  const auto n = static_cast<Eigen::Index>(y.size());
  constexpr double kTau = 1e-12;
  BinarySvmSolution sol;
  sol.alpha.assign(y.size(), 0.0);
  std::vector<double> G(y.size(), -1.0);
  auto yd = [&](Eigen::Index i) { return static_cast<double>(y[static_cast<std::size_t>(i)]); };
  auto& a = sol.alpha;
  auto in_up = [&](Eigen::Index t) { return (y[t] > 0 && a[t] < C) || (y[t] < 0 && a[t] > 0); };
  auto in_low = [&](Eigen::Index t) { return (y[t] > 0 && a[t] > 0) || (y[t] < 0 && a[t] < C); };

  while (sol.iterations < max_iter) {
    // i: maximal violating index from the up set.
    double gmax = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (in_up(t) && -yd(t) * G[t] >= gmax) {
        if (-yd(t) * G[t] > gmax || i < 0) i = t;
        gmax = -yd(t) * G[t];
      }
    }
    // j: second-order choice from the low set.
    double gmin = std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index j = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -yd(t) * G[t];
      gmin = std::min(gmin, v);
      if (i >= 0 && v < gmax) {
        const double b = gmax - v;
        double curv = K(i, i) + K(t, t) - 2.0 * K(i, t);
        if (curv <= 0.0) curv = kTau;
        const double obj = -(b * b) / curv;
        if (obj < best) {
          best = obj;
          j = t;
        }
      }
    }
    if (i < 0 || j < 0 || gmax - gmin <= tol) {
      sol.converged = true;
      break;
    }
    ++sol.iterations;

    const double ai = a[i], aj = a[j];
    double curv = K(i, i) + K(j, j) - 2.0 * K(i, j);
    if (curv <= 0.0) curv = kTau;
    if (y[i] != y[j]) {
      const double delta = (-G[i] - G[j]) / curv;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0) {
        if (a[j] < 0) { a[j] = 0; a[i] = diff; }
      } else {
        if (a[i] < 0) { a[i] = 0; a[j] = -diff; }
      }
      if (diff > 0) {
        if (a[i] > C) { a[i] = C; a[j] = C - diff; }
      } else {
        if (a[j] > C) { a[j] = C; a[i] = C + diff; }
      }
    } else {
      const double delta = (G[i] - G[j]) / curv;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > C) {
        if (a[i] > C) { a[i] = C; a[j] = sum - C; }
      } else {
        if (a[j] < 0) { a[j] = 0; a[i] = sum; }
      }
      if (sum > C) {
        if (a[j] > C) { a[j] = C; a[i] = sum - C; }
      } else {
        if (a[i] < 0) { a[i] = 0; a[j] = sum; }
      }
    }
    const double di = a[i] - ai, dj = a[j] - aj;
    for (Eigen::Index t = 0; t < n; ++t) {
      G[t] += yd(t) * (yd(i) * K(t, i) * di + yd(j) * K(t, j) * dj);
    }
  }

  // rho: mean of y G over free variables, else the midpoint of the bounds.
  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity(), sum = 0.0;
  int free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = yd(t) * G[t];
    if (a[t] >= C) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (a[t] <= 0) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++free;
      sum += yg;
    }
  }
  sol.rho = free > 0 ? sum / free : (ub + lb) / 2.0;
  return sol;
}

struct SvmPair {
  int first = 0, second = 0;           // class positions; first is +1
  std::vector<std::size_t> support;    // rows of SvmModel::support_vectors
  std::vector<double> coef;            // alpha_i * y_i
  double rho = 0.0;
  long iterations = 0;
  bool converged = true;
};

struct SvmModel {
  MatrixD support_vectors;
  std::vector<SvmPair> pairs;
  std::vector<int> classes;
  SvmConfig config;
  double gamma = 0.0;  // resolved kernel coefficient

  std::size_t dim() const { return static_cast<std::size_t>(support_vectors.cols()); }

  double kernel(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b) const {
    return std::tanh(gamma * a.dot(b) + config.coef0);
  }

  /// One column per class pair, in pair order.
  template <typename Scalar>
  MatrixD decision_function(const SampleMatrix<Scalar>& X) const {
    check_prediction_input(X, dim());
    MatrixD gram = X.template cast<double>() * support_vectors.transpose();
    gram = (gram.array() * gamma + config.coef0).tanh();
    MatrixD out(X.rows(), static_cast<Eigen::Index>(pairs.size()));
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double v = -pairs[p].rho;
        for (std::size_t s = 0; s < pairs[p].support.size(); ++s) {
          v += pairs[p].coef[s] * gram(i, static_cast<Eigen::Index>(pairs[p].support[s]));
        }
        out(i, static_cast<Eigen::Index>(p)) = v;
      }
    }
    return out;
  }

  template <typename Scalar>
  std::vector<int> predict(const SampleMatrix<Scalar>& X) const {
    const MatrixD dec = decision_function(X);
    MatrixD votes = MatrixD::Zero(X.rows(), static_cast<Eigen::Index>(classes.size()));
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        votes(i, dec(i, static_cast<Eigen::Index>(p)) > 0 ? pairs[p].first : pairs[p].second) += 1.0;
      }
    std::vector<int> out;
    for (auto j : argmax_rows(votes)) out.push_back(classes[j]);
    return out;
  }

  std::size_t support_count() const { return static_cast<std::size_t>(support_vectors.rows()); }
};

template <typename Scalar>
SvmModel train_svm(const SampleMatrix<Scalar>& X, const std::vector<int>& y, const SvmConfig& cfg,
                   Warnings* warnings = nullptr) {
  cfg.validate();
  SvmModel model;
  model.config = cfg;
  model.classes = check_training_input(X, y);
  model.gamma = cfg.gamma_for(static_cast<std::size_t>(X.cols()));
  const auto yi = encode_labels(y, model.classes);
  const auto C = static_cast<int>(model.classes.size());
  const MatrixD Xd = X.template cast<double>();

  std::vector<long> sv_slot(static_cast<std::size_t>(X.rows()), -1);
  std::vector<std::size_t> sv_rows;
  for (int a = 0; a < C; ++a)
    for (int b = a + 1; b < C; ++b) {
      std::vector<std::size_t> rows;
      std::vector<int> sign;
      for (std::size_t i = 0; i < yi.size(); ++i) {
        if (yi[i] == a || yi[i] == b) {
          rows.push_back(i);
          sign.push_back(yi[i] == a ? 1 : -1);
        }
      }
      MatrixD sub(static_cast<Eigen::Index>(rows.size()), Xd.cols());
      for (std::size_t r = 0; r < rows.size(); ++r) sub.row(static_cast<Eigen::Index>(r)) = Xd.row(static_cast<Eigen::Index>(rows[r]));
      MatrixD K = sub * sub.transpose();
      K = (K.array() * model.gamma + cfg.coef0).tanh();
      const auto sol = solve_binary_svm(K, sign, cfg.C, cfg.tol, cfg.max_iter);
      if (!sol.converged) {
        warn(warnings, fmt::format("SVM pair ({}, {}) stopped at max_iter={} before reaching tol", model.classes[a],
                                   model.classes[b], cfg.max_iter));
      }
      SvmPair pair;
      pair.first = a;
      pair.second = b;
      pair.rho = sol.rho;
      pair.iterations = sol.iterations;
      pair.converged = sol.converged;
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (sol.alpha[r] <= 0.0) continue;
        auto& slot = sv_slot[rows[r]];
        if (slot < 0) {
          slot = static_cast<long>(sv_rows.size());
          sv_rows.push_back(rows[r]);
        }
        pair.support.push_back(static_cast<std::size_t>(slot));
        pair.coef.push_back(sol.alpha[r] * sign[r]);
      }
      model.pairs.push_back(std::move(pair));
    }
  model.support_vectors.resize(static_cast<Eigen::Index>(sv_rows.size()), Xd.cols());
  for (std::size_t s = 0; s < sv_rows.size(); ++s) {
    model.support_vectors.row(static_cast<Eigen::Index>(s)) = Xd.row(static_cast<Eigen::Index>(sv_rows[s]));
  }
  return model;
}

}  // namespace poxbench
