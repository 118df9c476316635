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

// Confusion matrix, macro-averaged precision/recall/F1, accuracy, Cohen's
// kappa, and fold aggregation (mean, sample SD, SE = SD / sqrt(k)).

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "poxbench/core.hpp"

namespace poxbench {

/// counts[t][p]: samples of true class t predicted as p.
struct ConfusionMatrix {
  std::vector<std::vector<std::size_t>> counts;

  explicit ConfusionMatrix(std::size_t classes = 0) : counts(classes, std::vector<std::size_t>(classes, 0)) {}

  std::size_t classes() const { return counts.size(); }
  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& row : counts)
      for (auto v : row) n += v;
    return n;
  }
  std::size_t trace() const {
    std::size_t t = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) t += counts[c][c];
    return t;
  }
  std::size_t row_sum(std::size_t c) const {
    std::size_t s = 0;
    for (auto v : counts[c]) s += v;
    return s;
  }
  std::size_t col_sum(std::size_t c) const {
    std::size_t s = 0;
    for (const auto& row : counts) s += row[c];
    return s;
  }
  bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred, std::size_t classes) {
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorKind::kInput, fmt::format("{} true labels vs {} predictions", y_true.size(), y_pred.size()));
  }
  ConfusionMatrix m(classes);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i], p = y_pred[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= classes || static_cast<std::size_t>(p) >= classes) {
      throw Error(ErrorKind::kInput, fmt::format("label pair ({}, {}) outside 0..{}", t, p, classes - 1));
    }
    ++m.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return m;
}

struct MetricRecord {
  double accuracy = 0.0;
  double precision_macro = 0.0;
  double recall_macro = 0.0;
  double f1_macro = 0.0;  // unweighted mean of per-class F1
  double kappa = 0.0;
  int fold = -1;
  std::string model;
  std::string variant;
};

inline const std::vector<std::string> kMetricNames = {"accuracy", "precision", "recall", "f1", "kappa"};

inline double metric_value(const MetricRecord& r, const std::string& name) {
  if (name == "accuracy") return r.accuracy;
  if (name == "precision") return r.precision_macro;
  if (name == "recall") return r.recall_macro;
  if (name == "f1") return r.f1_macro;
  if (name == "kappa") return r.kappa;
  throw Error(ErrorKind::kConfig, "unknown metric '" + name + "'");
}

/// Per-class scores behind the macro means.
struct PerClassMetrics {
  std::vector<double> precision, recall, f1;
};

inline PerClassMetrics per_class_metrics(const ConfusionMatrix& m, Warnings* warnings = nullptr) {
  PerClassMetrics out;
  for (std::size_t c = 0; c < m.classes(); ++c) {
    const double tp = static_cast<double>(m.counts[c][c]);
    const double predicted = static_cast<double>(m.col_sum(c));
    const double actual = static_cast<double>(m.row_sum(c));
    double p = 0.0, r = 0.0, f = 0.0;
    if (predicted > 0) {
      p = tp / predicted;
    } else {
      warn(warnings, fmt::format("class {} never predicted; precision counted as 0", c));
    }
    if (actual > 0) {
      r = tp / actual;
    } else {
      warn(warnings, fmt::format("class {} absent from ground truth; recall counted as 0", c));
    }
    if (p + r > 0) f = 2.0 * p * r / (p + r);
    out.precision.push_back(p);
    out.recall.push_back(r);
    out.f1.push_back(f);
  }
  return out;
}

/// Observed and chance agreement; kappa = (po - pe) / (1 - pe).
inline double cohens_kappa(const ConfusionMatrix& m) {
  const std::size_t n = m.total();
  if (n == 0) throw Error(ErrorKind::kMetrics, "kappa of an empty confusion matrix");
  // (P_o - P_e) / (1 - P_e) scaled by n^2: integer sums stay exact below 2^53.
  std::uint64_t chance = 0;
  for (std::size_t c = 0; c < m.classes(); ++c) chance += static_cast<std::uint64_t>(m.row_sum(c)) * m.col_sum(c);
  const std::uint64_t nn = static_cast<std::uint64_t>(n) * n;
  if (chance >= nn) throw Error(ErrorKind::kMetrics, "kappa undefined: chance agreement is 1");
  const double agree = static_cast<double>(n) * static_cast<double>(m.trace());
  return (agree - static_cast<double>(chance)) / static_cast<double>(nn - chance);
}

/// Accuracy and macro metrics; kappa is left at 0.
inline MetricRecord basic_metrics(const ConfusionMatrix& m, Warnings* warnings = nullptr) {
  const std::size_t n = m.total();
  if (n == 0) throw Error(ErrorKind::kMetrics, "metrics of an empty confusion matrix");
  MetricRecord r;
  r.accuracy = static_cast<double>(m.trace()) / static_cast<double>(n);
  const auto pc = per_class_metrics(m, warnings);
  const double C = static_cast<double>(m.classes());
  for (std::size_t c = 0; c < m.classes(); ++c) {
    r.precision_macro += pc.precision[c] / C;
    r.recall_macro += pc.recall[c] / C;
    r.f1_macro += pc.f1[c] / C;
  }
  return r;
}

inline MetricRecord evaluate(const std::vector<int>& y_true, const std::vector<int>& y_pred, std::size_t classes,
                             Warnings* warnings = nullptr) {
  const auto m = confusion(y_true, y_pred, classes);
  auto r = basic_metrics(m, warnings);
  r.kappa = cohens_kappa(m);
  return r;
}

struct Summary {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation
  double se = 0.0;  // sd / sqrt(k)
  std::size_t k = 0;
};

inline Summary summarize(const std::vector<double>& values) {
  const std::size_t k = values.size();
  if (k < 2) throw Error(ErrorKind::kAggregation, fmt::format("aggregation needs >= 2 values, got {}", k));
  Summary s;
  s.k = k;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(k);
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(k - 1));
  s.se = s.sd / std::sqrt(static_cast<double>(k));
  return s;
}

/// Per-metric summaries, in kMetricNames order.
inline std::vector<Summary> aggregate(const std::vector<MetricRecord>& records) {
  std::vector<Summary> out;
  for (const auto& name : kMetricNames) {
    std::vector<double> v;
    for (const auto& r : records) v.push_back(metric_value(r, name));
    out.push_back(summarize(v));
  }
  return out;
}

/// "mean% ± spread%" with two decimals.
inline std::string format_percent(double mean, double spread) {
  return fmt::format("{:.2f}% ± {:.2f}%", 100.0 * mean, 100.0 * spread);
}

}  // namespace poxbench
