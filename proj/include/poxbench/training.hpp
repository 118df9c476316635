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

// Pieces shared by the classifiers: input checks, label bookkeeping and
// row-wise argmax.

#include <algorithm>
#include <set>
#include <vector>

#include <fmt/format.h>

#include "poxbench/core.hpp"

namespace poxbench {

using MatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Sorted distinct labels of `y`. Throws a training error when fewer than two
/// classes are present.
template <typename Scalar>
std::vector<int> check_training_input(const SampleMatrix<Scalar>& X, const std::vector<int>& y) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) {
    throw Error(ErrorKind::kInput, fmt::format("{} labels for {} rows", y.size(), X.rows()));
  }
  if (X.cols() < 1) throw Error(ErrorKind::kInput, "feature matrix has no columns");
  if (!X.allFinite()) throw Error(ErrorKind::kInput, "feature matrix holds NaN or Inf");
  std::set<int> distinct(y.begin(), y.end());
  if (distinct.size() < 2) {
    throw Error(ErrorKind::kTraining, fmt::format("training needs >= 2 classes, got {}", distinct.size()));
  }
  if (*distinct.begin() < 0) throw Error(ErrorKind::kInput, "negative class label");
  return {distinct.begin(), distinct.end()};
}

/// Position of each label in `classes` (sorted).
inline std::vector<int> encode_labels(const std::vector<int>& y, const std::vector<int>& classes) {
  std::vector<int> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    out[i] = static_cast<int>(std::lower_bound(classes.begin(), classes.end(), y[i]) - classes.begin());
  }
  return out;
}

template <typename Scalar>
void check_prediction_input(const SampleMatrix<Scalar>& X, std::size_t dim) {
  if (static_cast<std::size_t>(X.cols()) != dim) {
    throw Error(ErrorKind::kInput, fmt::format("model expects {} features, got {}", dim, X.cols()));
  }
}

/// Column of the largest entry in each row; the first column wins ties.
inline std::vector<std::size_t> argmax_rows(const MatrixD& scores) {
  std::vector<std::size_t> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < scores.cols(); ++j) {
      if (scores(i, j) > scores(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return out;
}

/// Row-wise softmax in place, shifted by the row maximum.
inline void softmax_rows(MatrixD& z) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double m = z.row(i).maxCoeff();
    z.row(i) = (z.row(i).array() - m).exp();
    z.row(i) /= z.row(i).sum();
  }
}

}  // namespace poxbench
