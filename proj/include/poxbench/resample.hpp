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

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "poxbench/core.hpp"

namespace poxbench {

struct ResampleConfig {
  enum class Target { kBalanceToMajority, kExplicit };

  int k_smote = 5;
  int k_enn = 3;
  Target target = Target::kBalanceToMajority;
  std::map<int, std::size_t> explicit_counts;  // label -> desired count (kExplicit)
  std::uint64_t seed = 0;

  void validate() const {
    if (k_smote < 1) throw Error(ErrorKind::kConfig, "k_smote must be >= 1");
    if (k_enn < 1 || k_enn % 2 == 0) throw Error(ErrorKind::kConfig, "k_enn must be odd and >= 1");
  }
};

/// Where a row came from. Originals carry the caller's id (a manifest index
/// in the pipeline); synthetic rows carry both interpolation endpoints, as
/// row positions in the oversampling input and as caller ids, plus the
/// interpolation coefficient.
struct RowProvenance {
  bool synthetic = false;
  std::size_t id = 0;
  std::size_t parent = 0;
  std::size_t neighbor = 0;
  std::size_t parent_id = 0;
  std::size_t neighbor_id = 0;
  double u = 0.0;

  bool operator==(const RowProvenance&) const = default;
};

template <typename Scalar>
struct LabeledFeatures {
  SampleMatrix<Scalar> X;
  std::vector<int> y;
  std::vector<RowProvenance> provenance;

  std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }

  std::vector<bool> synthetic_mask() const {
    std::vector<bool> mask;
    mask.reserve(provenance.size());
    for (const auto& p : provenance) mask.push_back(p.synthetic);
    return mask;
  }

  /// Wraps plain data; row i gets id `ids[i]` (or i when ids is empty).
  static LabeledFeatures from(SampleMatrix<Scalar> X, std::vector<int> y, std::vector<std::size_t> ids = {}) {
    LabeledFeatures out;
    if (static_cast<std::size_t>(X.rows()) != y.size()) {
      throw Error(ErrorKind::kInput, fmt::format("{} labels for {} rows", y.size(), X.rows()));
    }
    out.X = std::move(X);
    out.y = std::move(y);
    out.provenance.resize(out.y.size());
    for (std::size_t i = 0; i < out.y.size(); ++i) out.provenance[i].id = ids.empty() ? i : ids.at(i);
    return out;
  }

  std::vector<std::size_t> class_counts(std::size_t num_classes) const {
    std::vector<std::size_t> c(num_classes, 0);
    for (int v : y) ++c.at(static_cast<std::size_t>(v));
    return c;
  }

  bool operator==(const LabeledFeatures& o) const { return X == o.X && y == o.y && provenance == o.provenance; }
};

namespace detail {

template <typename Scalar>
double squared_distance(const SampleMatrix<Scalar>& X, std::size_t a, std::size_t b) {
  double acc = 0.0;
  const Scalar* pa = X.row(static_cast<Eigen::Index>(a)).data();
  const Scalar* pb = X.row(static_cast<Eigen::Index>(b)).data();
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double diff = static_cast<double>(pa[j]) - static_cast<double>(pb[j]);
    acc += diff * diff;
  }
  return acc;
}

/// The k nearest of `candidates` to row `query` (excluded), by Euclidean
/// distance, ties to the lower row index.
template <typename Scalar>
std::vector<std::size_t> nearest_among(const SampleMatrix<Scalar>& X, std::size_t query,
                                       const std::vector<std::size_t>& candidates, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(candidates.size());
  for (std::size_t c : candidates) {
    if (c != query) d.emplace_back(squared_distance(X, query, c), c);
  }
  const std::size_t take = std::min(k, d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(take), d.end());
  std::vector<std::size_t> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(d[i].second);
  return out;
}

inline std::size_t num_labels(const std::vector<int>& y) {
  int hi = -1;
  for (int v : y) {
    if (v < 0) throw Error(ErrorKind::kInput, "negative label");
    hi = std::max(hi, v);
  }
  return static_cast<std::size_t>(hi + 1);
}

}  // namespace detail

/// The k nearest rows sharing row i's label, excluding i itself.
template <typename Scalar>
std::vector<std::size_t> knn_same_class(const SampleMatrix<Scalar>& X, const std::vector<int>& y, std::size_t i,
                                        std::size_t k) {
  if (i >= y.size()) throw Error(ErrorKind::kInput, "query row out of range");
  std::vector<std::size_t> members;
  for (std::size_t r = 0; r < y.size(); ++r) {
    if (y[r] == y[i]) members.push_back(r);
  }
  if (members.size() < k + 1) {
    throw Error(ErrorKind::kResampling, fmt::format("class {} has {} members, need at least {} for {} neighbours",
                                                    y[i], members.size(), k + 1, k));
  }
  return detail::nearest_among(X, i, members, k);
}

/// SMOTE oversampling. Each synthetic row is parent + u * (neighbour - parent)
/// with the neighbour drawn from the parent's k_smote same-class neighbours.
/// Originals come first and are untouched; synthetic rows follow, grouped by
/// class in ascending label order.
template <typename Scalar>
LabeledFeatures<Scalar> smote(const LabeledFeatures<Scalar>& data, const ResampleConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  const std::size_t n = data.rows();
  if (data.y.size() != n) throw Error(ErrorKind::kInput, "label vector does not match rows");
  const std::size_t C = detail::num_labels(data.y);
  std::vector<std::vector<std::size_t>> members(C);
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(data.y[i])].push_back(i);

  std::size_t majority = 0;
  for (const auto& m : members) majority = std::max(majority, m.size());

  std::vector<std::size_t> target(C, 0);
  for (std::size_t c = 0; c < C; ++c) {
    if (cfg.target == ResampleConfig::Target::kBalanceToMajority) {
      target[c] = members[c].empty() ? 0 : majority;
    } else {
      auto it = cfg.explicit_counts.find(static_cast<int>(c));
      target[c] = it == cfg.explicit_counts.end() ? members[c].size() : std::max(it->second, members[c].size());
    }
  }

  const auto k = static_cast<std::size_t>(cfg.k_smote);
  LabeledFeatures<Scalar> out;
  out.y = data.y;
  out.provenance = data.provenance;
  if (out.provenance.size() != n) {
    out.provenance.assign(n, RowProvenance{});
    for (std::size_t i = 0; i < n; ++i) out.provenance[i].id = i;
  }

  std::vector<Scalar> synth;
  const auto d = static_cast<std::size_t>(data.X.cols());
  for (std::size_t c = 0; c < C; ++c) {
    if (target[c] <= members[c].size()) continue;
    if (members[c].size() <= k) {
      throw Error(ErrorKind::kResampling, fmt::format("class {} has {} samples; SMOTE with k={} needs more than {}", c,
                                                      members[c].size(), k, k));
    }
    std::vector<std::vector<std::size_t>> neighbours(members[c].size());
    parallel_for(members[c].size(), worker_count(threads), [&](std::size_t m) {
      neighbours[m] = detail::nearest_among(data.X, members[c][m], members[c], k);
    });
    Rng rng(cfg.seed, {0x736d6f7465ULL, static_cast<std::uint64_t>(c)});
    for (std::size_t s = members[c].size(); s < target[c]; ++s) {
      const std::size_t m = rng.below(members[c].size());
      const std::size_t parent = members[c][m];
      const std::size_t nb = neighbours[m][rng.below(k)];
      const double u = rng.uniform();
      for (std::size_t j = 0; j < d; ++j) {
        const Scalar p = data.X(static_cast<Eigen::Index>(parent), static_cast<Eigen::Index>(j));
        const Scalar q = data.X(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(j));
        synth.push_back(static_cast<Scalar>(p + static_cast<Scalar>(u) * (q - p)));
      }
      RowProvenance prov;
      prov.synthetic = true;
      prov.parent = parent;
      prov.neighbor = nb;
      prov.parent_id = out.provenance[parent].id;
      prov.neighbor_id = out.provenance[nb].id;
      prov.u = u;
      out.provenance.push_back(prov);
      out.y.push_back(static_cast<int>(c));
    }
  }

  const std::size_t added = synth.size() / std::max<std::size_t>(d, 1);
  out.X.resize(static_cast<Eigen::Index>(n + added), data.X.cols());
  if (n > 0) out.X.topRows(static_cast<Eigen::Index>(n)) = data.X;
  for (std::size_t r = 0; r < added; ++r)
    for (std::size_t j = 0; j < d; ++j)
      out.X(static_cast<Eigen::Index>(n + r), static_cast<Eigen::Index>(j)) = synth[r * d + j];
  return out;
}

/// Edited nearest neighbours, single pass: row i is dropped when the most
/// frequent label among its k nearest rows (any class, i excluded, ties to the
/// lower label) is not its own. All decisions use the input neighbourhoods.
template <typename Scalar>
LabeledFeatures<Scalar> enn_clean(const LabeledFeatures<Scalar>& data, int k_enn, Warnings* warnings = nullptr,
                                  unsigned threads = 1) {
  if (k_enn < 1) throw Error(ErrorKind::kConfig, "k_enn must be >= 1");
  const std::size_t n = data.rows();
  if (n < static_cast<std::size_t>(k_enn) + 1) {
    throw Error(ErrorKind::kResampling, fmt::format("ENN with k={} needs at least {} rows, got {}", k_enn, k_enn + 1, n));
  }
  bool identical = true;
  for (std::size_t i = 1; i < n && identical; ++i) identical = data.X.row(static_cast<Eigen::Index>(i)) == data.X.row(0);
  if (identical) {
    warn(warnings, "ENN skipped: all rows are identical");
    return data;
  }

  const std::size_t C = detail::num_labels(data.y);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::vector<char> keep(n, 1);
  parallel_for(n, worker_count(threads), [&](std::size_t i) {
    const auto nb = detail::nearest_among(data.X, i, all, static_cast<std::size_t>(k_enn));
    std::vector<int> votes(C, 0);
    for (std::size_t j : nb) ++votes[static_cast<std::size_t>(data.y[j])];
    const auto majority = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    keep[i] = majority == data.y[i] ? 1 : 0;
  });

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) kept.push_back(i);
  }
  LabeledFeatures<Scalar> out;
  out.X.resize(static_cast<Eigen::Index>(kept.size()), data.X.cols());
  for (std::size_t r = 0; r < kept.size(); ++r) {
    out.X.row(static_cast<Eigen::Index>(r)) = data.X.row(static_cast<Eigen::Index>(kept[r]));
    out.y.push_back(data.y[kept[r]]);
    out.provenance.push_back(data.provenance.empty() ? RowProvenance{false, kept[r]} : data.provenance[kept[r]]);
  }
  return out;
}

template <typename Scalar>
struct SmoteEnnResult {
  LabeledFeatures<Scalar> data;
  std::vector<std::size_t> counts_before;
  std::vector<std::size_t> counts_after_smote;
  std::vector<std::size_t> counts_after_enn;
};

template <typename Scalar>
SmoteEnnResult<Scalar> smoteenn(const LabeledFeatures<Scalar>& data, const ResampleConfig& cfg,
                                Warnings* warnings = nullptr, unsigned threads = 1) {
  const std::size_t C = detail::num_labels(data.y);
  SmoteEnnResult<Scalar> res;
  res.counts_before = data.class_counts(C);
  auto oversampled = smote(data, cfg, threads);
  res.counts_after_smote = oversampled.class_counts(C);
  res.data = enn_clean(oversampled, cfg.k_enn, warnings, threads);
  res.counts_after_enn = res.data.class_counts(C);
  return res;
}

}  // namespace poxbench
