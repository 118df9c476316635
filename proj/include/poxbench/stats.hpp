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

// Shapiro-Wilk normality test (Royston's approximation, algorithm AS R94)
// and the two-sided Mann-Whitney U test, plus the pairwise significance
// matrix over per-fold score vectors.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "poxbench/core.hpp"

namespace poxbench {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double p_raw = 1.0;  // before any multiple-comparison adjustment
  std::string method;  // shapiro-wilk | mann-whitney-exact | mann-whitney-normal
  double alpha = 0.05;
  bool reject = false;
};

inline TestResult make_result(double statistic, double p, std::string method, double alpha) {
  TestResult r;
  r.statistic = statistic;
  r.p_value = r.p_raw = std::clamp(p, 0.0, 1.0);
  r.method = std::move(method);
  r.alpha = alpha;
  r.reject = r.p_value < alpha;
  return r;
}

namespace detail {

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

inline double normal_upper_tail(double z) {
  return boost::math::cdf(boost::math::complement(boost::math::normal_distribution<double>(), z));
}

inline double poly(std::initializer_list<double> c, double x) {
  // c0 + c1 x + c2 x^2 + ...
  double v = 0.0, xp = 1.0;
  for (double ci : c) {
    v += ci * xp;
    xp *= x;
  }
  return v;
}

}  // namespace detail

/// Shapiro-Wilk coefficients a_1..a_{n/2} for the upper half (positive).
inline std::vector<double> shapiro_wilk_coefficients(std::size_t n) {
  if (n < 3 || n > 5000) throw Error(ErrorKind::kInput, fmt::format("Shapiro-Wilk needs 3 <= n <= 5000, got {}", n));
  const std::size_t half = n / 2;
  std::vector<double> a(half);
  if (n == 3) {
    a[0] = std::sqrt(0.5);
    return a;
  }
  const double an = static_cast<double>(n);
  std::vector<double> m(half);
  double summ2 = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    m[i] = detail::normal_quantile((static_cast<double>(i + 1) - 0.375) / (an + 0.25));
    summ2 += m[i] * m[i];
  }
  summ2 *= 2.0;
  const double ssumm2 = std::sqrt(summ2);
  const double rsn = 1.0 / std::sqrt(an);
  const double a1 = detail::poly({0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056}, rsn) - m[0] / ssumm2;
  std::size_t first = 1;
  double fac;
  if (n > 5) {
    const double a2 = -m[1] / ssumm2 + detail::poly({0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633}, rsn);
    fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
    a[1] = a2;
    first = 2;
  } else {
    fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
  }
  a[0] = a1;
  for (std::size_t i = first; i < half; ++i) a[i] = -m[i] / fac;
  return a;
}

inline TestResult shapiro_wilk(std::vector<double> x, double alpha = 0.05) {
  const std::size_t n = x.size();
  if (n < 3 || n > 5000) throw Error(ErrorKind::kInput, fmt::format("Shapiro-Wilk needs 3 <= n <= 5000, got {}", n));
  for (double v : x)
    if (!std::isfinite(v)) throw Error(ErrorKind::kInput, "Shapiro-Wilk sample contains a non-finite value");
  std::sort(x.begin(), x.end());
  const double range = x.back() - x.front();
  if (!(range > 0.0)) throw Error(ErrorKind::kDegenerate, "Shapiro-Wilk sample is constant");

  // Shift and scale by the range before summing.
  const double origin = x[n / 2];
  for (auto& v : x) v = (v - origin) / range;
  const auto a = shapiro_wilk_coefficients(n);
  double num = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) num += a[i] * (x[n - 1 - i] - x[i]);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  double w = std::min(1.0, num * num / ss);

  double p;
  const double an = static_cast<double>(n);
  if (n == 3) {
    constexpr double kPi6 = 1.90985931710274, kStqr = 1.04719755119660;  // 6/pi, pi/3
    p = std::max(0.0, kPi6 * (std::asin(std::sqrt(w)) - kStqr));
  } else {
    double y = std::log1p(-w);
    double mu, sigma;
    if (n <= 11) {
      const double gamma = detail::poly({-2.273, 0.459}, an);
      if (y >= gamma) return make_result(w, 1e-99, "shapiro-wilk", alpha);
      y = -std::log(gamma - y);
      mu = detail::poly({0.544, -0.39978, 0.025054, -6.714e-4}, an);
      sigma = std::exp(detail::poly({1.3822, -0.77857, 0.062767, -0.0020322}, an));
    } else {
      const double ln = std::log(an);
      mu = detail::poly({-1.5861, -0.31082, -0.083751, 0.0038915}, ln);
      sigma = std::exp(detail::poly({-0.4803, -0.082676, 0.0030302}, ln));
    }
    p = w >= 1.0 ? 1.0 : detail::normal_upper_tail((y - mu) / sigma);
  }
  return make_result(w, p, "shapiro-wilk", alpha);
}

struct MannWhitneyOptions {
  std::size_t exact_max_total = 16;  // exact enumeration when |a| + |b| <= this and no ties
  double alpha = 0.05;
};

namespace detail {

/// Midranks (1-based) of the concatenation a ++ b; also returns sum(t^3 - t) over tie groups.
inline std::vector<double> midranks(const std::vector<double>& all, double* tie_term) {
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return all[i] < all[j]; });
  std::vector<double> rank(all.size());
  double ties = 0.0;
  for (std::size_t s = 0; s < order.size();) {
    std::size_t e = s;
    while (e + 1 < order.size() && all[order[e + 1]] == all[order[s]]) ++e;
    const double r = (static_cast<double>(s) + static_cast<double>(e)) / 2.0 + 1.0;
    for (std::size_t k = s; k <= e; ++k) rank[order[k]] = r;
    const double t = static_cast<double>(e - s + 1);
    ties += t * t * t - t;
    s = e + 1;
  }
  if (tie_term != nullptr) *tie_term = ties;
  return rank;
}

/// counts[u] = number of ways to split ranks 1..n1+n2 with U = u for the first group.
inline std::vector<double> mann_whitney_counts(std::size_t n1, std::size_t n2) {
  // f(i, j, u) = f(i - 1, j, u - j) + f(i, j - 1, u); iterate j outer, keep rows per i.
  const std::size_t umax = n1 * n2;
  std::vector<std::vector<double>> f(n1 + 1, std::vector<double>(umax + 1, 0.0));
  for (std::size_t i = 0; i <= n1; ++i) f[i][0] = 1.0;  // j = 0
  for (std::size_t j = 1; j <= n2; ++j) {
    for (std::size_t i = 1; i <= n1; ++i) {
      // f[i] currently holds f(i, j-1, .); f[i-1] already holds f(i-1, j, .).
      for (std::size_t u = umax + 1; u-- > 0;) {
        f[i][u] = f[i][u] + (u >= j ? f[i - 1][u - j] : 0.0);
      }
    }
  }
  return f[n1];
}

}  // namespace detail

/// Two-sided Mann-Whitney U; statistic is U of sample a.
inline TestResult mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b,
                                 const MannWhitneyOptions& opt = {}) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::kInput, "Mann-Whitney needs two non-empty samples");
  std::vector<double> all(a);
  all.insert(all.end(), b.begin(), b.end());
  for (double v : all)
    if (!std::isfinite(v)) throw Error(ErrorKind::kInput, "Mann-Whitney sample contains a non-finite value");
  double tie_term = 0.0;
  const auto rank = detail::midranks(all, &tie_term);
  const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size()), n = n1 + n2;
  double ra = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ra += rank[i];
  const double u = ra - n1 * (n1 + 1.0) / 2.0;

  if (all.size() <= opt.exact_max_total && tie_term == 0.0) {
    const auto counts = detail::mann_whitney_counts(a.size(), b.size());
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const auto ui = static_cast<std::size_t>(std::llround(u));
    double lower = 0.0, upper = 0.0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      if (k <= ui) lower += counts[k];
      if (k >= ui) upper += counts[k];
    }
    const double p = 2.0 * std::min(lower, upper) / total;
    return make_result(u, p, "mann-whitney-exact", opt.alpha);
  }

  const double mu = n1 * n2 / 2.0;
  const double var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  double p = 1.0;
  if (var > 0.0) {
    const double z = std::max(0.0, std::abs(u - mu) - 0.5) / std::sqrt(var);
    p = 2.0 * detail::normal_upper_tail(z);
  }
  return make_result(u, p, "mann-whitney-normal", opt.alpha);
}

/// Holm step-down adjustment; returns adjusted p-values in input order.
inline std::vector<double> holm_adjust(const std::vector<double>& p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return p[i] < p[j]; });
  std::vector<double> out(m);
  double running = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    running = std::max(running, std::min(1.0, static_cast<double>(m - r) * p[order[r]]));
    out[order[r]] = running;
  }
  return out;
}

struct SignificanceOptions {
  MannWhitneyOptions mann_whitney;
  bool holm = false;
};

struct PairTest {
  std::string first, second;
  TestResult result;
};

struct SignificanceReport {
  std::vector<std::string> models;                 // sorted
  std::vector<std::optional<TestResult>> normality;  // empty when the vector is constant
  std::vector<PairTest> pairs;                     // (i, j), i < j in models order
  bool all_normal = true;
  bool holm = false;
  std::size_t exact_max_total = 16;
};

/// Shapiro-Wilk per vector, Mann-Whitney per unordered pair. Mann-Whitney is
/// reported whether or not the vectors pass the normality test.
inline SignificanceReport pairwise_significance(const std::map<std::string, std::vector<double>>& scores,
                                                const SignificanceOptions& opt = {}, Warnings* warnings = nullptr) {
  SignificanceReport rep;
  rep.holm = opt.holm;
  rep.exact_max_total = opt.mann_whitney.exact_max_total;
  std::optional<std::size_t> k;
  for (const auto& [name, v] : scores) {
    if (k && v.size() != *k) {
      throw Error(ErrorKind::kInput,
                  fmt::format("score vector for '{}' has {} entries, expected {}", name, v.size(), *k));
    }
    k = v.size();
    rep.models.push_back(name);
    try {
      auto sw = shapiro_wilk(v, opt.mann_whitney.alpha);
      rep.all_normal = rep.all_normal && !sw.reject;
      rep.normality.emplace_back(std::move(sw));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kDegenerate && e.kind() != ErrorKind::kInput) throw;
      warn(warnings, fmt::format("normality test skipped for '{}': {}", name, e.what()));
      rep.normality.emplace_back(std::nullopt);
      rep.all_normal = false;
    }
  }
  for (std::size_t i = 0; i < rep.models.size(); ++i)
    for (std::size_t j = i + 1; j < rep.models.size(); ++j) {
      rep.pairs.push_back({rep.models[i], rep.models[j],
                           mann_whitney_u(scores.at(rep.models[i]), scores.at(rep.models[j]), opt.mann_whitney)});
    }
  if (opt.holm && !rep.pairs.empty()) {
    std::vector<double> raw;
    for (const auto& pt : rep.pairs) raw.push_back(pt.result.p_raw);
    const auto adj = holm_adjust(raw);
    for (std::size_t i = 0; i < rep.pairs.size(); ++i) {
      auto& r = rep.pairs[i].result;
      r.p_value = adj[i];
      r.reject = r.p_value < r.alpha;
    }
  }
  return rep;
}

}  // namespace poxbench
