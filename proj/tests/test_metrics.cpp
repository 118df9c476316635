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

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "poxbench/metrics.hpp"

namespace poxbench {
namespace {

ConfusionMatrix from_counts(const std::vector<std::vector<std::size_t>>& counts) {
  ConfusionMatrix m(counts.size());
  m.counts = counts;
  return m;
}

// Per-sample tally: never looks at a confusion matrix.
struct Tally {
  double accuracy, precision, recall, f1, kappa;
};

Tally tally(const std::vector<int>& t, const std::vector<int>& p, int C) {
  const double n = static_cast<double>(t.size());
  double hits = 0;
  for (std::size_t i = 0; i < t.size(); ++i) hits += t[i] == p[i];
  Tally out{hits / n, 0, 0, 0, 0};
  double pe = 0;
  for (int c = 0; c < C; ++c) {
    double tp = 0, fp = 0, fn = 0, true_c = 0, pred_c = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] == c && p[i] == c) tp += 1;
      if (t[i] != c && p[i] == c) fp += 1;
      if (t[i] == c && p[i] != c) fn += 1;
      true_c += t[i] == c;
      pred_c += p[i] == c;
    }
    const double prec = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double rec = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    out.precision += prec / C;
    out.recall += rec / C;
    out.f1 += (prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0) / C;
    pe += (true_c / n) * (pred_c / n);
  }
  out.kappa = (out.accuracy - pe) / (1 - pe);
  return out;
}

TEST(Confusion, CountsPairsAndChecksInput) {
  const auto m = confusion({0, 0, 1, 2, 2, 2}, {0, 1, 1, 2, 0, 2}, 3);
  EXPECT_EQ(m.counts, (std::vector<std::vector<std::size_t>>{{1, 1, 0}, {0, 1, 0}, {1, 0, 2}}));
  EXPECT_EQ(m.total(), 6u);
  EXPECT_EQ(m.trace(), 4u);

  const auto diag = confusion({0, 1, 2, 1}, {0, 1, 2, 1}, 3);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b)
      if (a != b) {
        EXPECT_EQ(diag.counts[a][b], 0u);
      }

  EXPECT_EQ(confusion({}, {}, 4).total(), 0u);

  auto expect_kind = [](auto fn, ErrorKind kind) {
    try {
      fn();
      FAIL() << "expected an error";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), kind);
    }
  };
  expect_kind([] { confusion({0, 1}, {0}, 2); }, ErrorKind::kInput);
  expect_kind([] { confusion({0, 2}, {0, 1}, 2); }, ErrorKind::kInput);
  expect_kind([] { confusion({0, -1}, {0, 1}, 2); }, ErrorKind::kInput);
}

TEST(Metrics, MatchesPerSampleTallyOnRandomInstances) {
  Rng rng(20260301);
  int checked = 0;
  for (int trial = 0; trial < 1500; ++trial) {
    const int C = 2 + static_cast<int>(rng.below(4));
    const std::size_t n = 1 + rng.below(50);
    std::vector<int> t(n), p(n);
    // Mix uniform noise with a copy of the truth so accuracy spans [0, 1].
    const double agree = rng.uniform();
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = static_cast<int>(rng.below(static_cast<std::size_t>(C)));
      p[i] = rng.bernoulli(agree) ? t[i] : static_cast<int>(rng.below(static_cast<std::size_t>(C)));
    }
    const auto m = confusion(t, p, static_cast<std::size_t>(C));
    ASSERT_EQ(m.total(), n);
    const auto got = basic_metrics(m);
    const auto want = tally(t, p, C);
    EXPECT_NEAR(got.accuracy, want.accuracy, 1e-12);
    EXPECT_NEAR(got.precision_macro, want.precision, 1e-12);
    EXPECT_NEAR(got.recall_macro, want.recall, 1e-12);
    EXPECT_NEAR(got.f1_macro, want.f1, 1e-12);
    bool degenerate = false;
    try {
      EXPECT_NEAR(cohens_kappa(m), want.kappa, 1e-12);
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kMetrics);
      degenerate = true;
    }
    checked += !degenerate;
  }
  EXPECT_GE(checked, 1000);
}

TEST(Metrics, HandTalliedTwoByTwo) {
  const auto m = from_counts({{20, 5}, {10, 15}});
  const auto r = basic_metrics(m);
  EXPECT_DOUBLE_EQ(r.accuracy, 0.7);
  // Class 0: P = 20/30, R = 20/25. Class 1: P = 15/20, R = 15/25.
  EXPECT_NEAR(r.precision_macro, (20.0 / 30 + 15.0 / 20) / 2, 1e-15);
  EXPECT_NEAR(r.recall_macro, (20.0 / 25 + 15.0 / 25) / 2, 1e-15);
  const double f0 = 2 * (2.0 / 3) * 0.8 / (2.0 / 3 + 0.8), f1 = 2 * 0.75 * 0.6 / 1.35;
  EXPECT_NEAR(r.f1_macro, (f0 + f1) / 2, 1e-15);
  EXPECT_EQ(cohens_kappa(m), 0.4);
}

TEST(Metrics, KappaLimits) {
  EXPECT_DOUBLE_EQ(cohens_kappa(from_counts({{5, 0, 0}, {0, 7, 0}, {0, 0, 2}})), 1.0);
  EXPECT_NEAR(cohens_kappa(from_counts({{25, 25}, {25, 25}})), 0.0, 1e-15);
  // Rows proportional to the column marginals.
  EXPECT_NEAR(cohens_kappa(from_counts({{2, 4, 6}, {1, 2, 3}, {3, 6, 9}})), 0.0, 1e-15);
  // Any off-diagonal mass keeps kappa below 1.
  EXPECT_LT(cohens_kappa(from_counts({{5, 1}, {0, 7}})), 1.0);

  try {
    cohens_kappa(from_counts({{9, 0}, {0, 0}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMetrics);
  }
}

TEST(Metrics, DiagonalScoresOneAndEmptyIsAnError) {
  const auto r = evaluate({0, 1, 2, 3, 3}, {0, 1, 2, 3, 3}, 4);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.precision_macro, 1.0);
  EXPECT_EQ(r.recall_macro, 1.0);
  EXPECT_EQ(r.f1_macro, 1.0);
  EXPECT_EQ(r.kappa, 1.0);
  try {
    basic_metrics(ConfusionMatrix(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMetrics);
  }
}

TEST(Metrics, NeverPredictedClassContributesZeroWithWarning) {
  Warnings w;
  const auto r = basic_metrics(from_counts({{4, 0, 1}, {2, 0, 0}, {0, 0, 3}}), &w);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_NE(w.messages[0].find("class 1"), std::string::npos);
  EXPECT_NEAR(r.precision_macro, (4.0 / 6 + 0.0 + 3.0 / 4) / 3, 1e-15);
  EXPECT_NEAR(r.recall_macro, (4.0 / 5 + 0.0 + 1.0) / 3, 1e-15);
}

TEST(Metrics, PermutingClassIdsLeavesScoresUnchanged) {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const int C = 4;
    std::vector<int> t(60), p(60);
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = static_cast<int>(rng.below(C));
      p[i] = rng.bernoulli(0.6) ? t[i] : static_cast<int>(rng.below(C));
    }
    std::vector<int> perm(C);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<int> tp(t.size()), pp(p.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      tp[i] = perm[static_cast<std::size_t>(t[i])];
      pp[i] = perm[static_cast<std::size_t>(p[i])];
    }
    const auto a = evaluate(t, p, C), b = evaluate(tp, pp, C);
    EXPECT_NEAR(a.accuracy, b.accuracy, 1e-12);
    EXPECT_NEAR(a.precision_macro, b.precision_macro, 1e-12);
    EXPECT_NEAR(a.recall_macro, b.recall_macro, 1e-12);
    EXPECT_NEAR(a.f1_macro, b.f1_macro, 1e-12);
    EXPECT_NEAR(a.kappa, b.kappa, 1e-12);

    const auto pa = per_class_metrics(confusion(t, p, C)), pb = per_class_metrics(confusion(tp, pp, C));
    for (int c = 0; c < C; ++c) {
      EXPECT_NEAR(pa.recall[static_cast<std::size_t>(c)], pb.recall[static_cast<std::size_t>(perm[c])], 1e-12);
    }
  }
}

TEST(Aggregate, TwoPointClosedForm) {
  const auto s = summarize({0.6, 0.8});
  EXPECT_NEAR(s.mean, 0.7, 1e-15);
  EXPECT_NEAR(s.sd, std::sqrt(0.02), 1e-15);
  EXPECT_NEAR(s.sd, 0.1414, 5e-5);
  EXPECT_NEAR(s.se, 0.1, 1e-15);
}

TEST(Aggregate, IdenticalRecordsHaveNoSpread) {
  MetricRecord r{0.9, 0.75, 0.74, 0.74, 0.71, 0, "logreg", "original"};
  const auto out = aggregate(std::vector<MetricRecord>(10, r));
  ASSERT_EQ(out.size(), kMetricNames.size());
  for (const auto& s : out) {
    EXPECT_NEAR(s.sd, 0.0, 1e-15);
    EXPECT_NEAR(s.se, 0.0, 1e-15);
    EXPECT_EQ(s.k, 10u);
  }
  EXPECT_NEAR(out[4].mean, 0.71, 1e-15);
}

TEST(Aggregate, PublishedSpreadsAreSdOverRootTen) {
  // Kappa for logistic regression: 1.71% SD over ten folds versus 0.54% SE.
  EXPECT_NEAR(0.0171 / std::sqrt(10.0), 0.0054, 5e-5);
  // Accuracy: 2.16% SD versus 0.68% SE.
  EXPECT_NEAR(0.0216 / std::sqrt(10.0), 0.0068, 5e-5);
  // Precision: 12.82% SD versus 4.05% SE.
  EXPECT_NEAR(0.1282 / std::sqrt(10.0), 0.0405, 5e-5);
  EXPECT_EQ(format_percent(0.7119, 0.0171), "71.19% ± 1.71%");
}

TEST(Aggregate, NeedsTwoRecords) {
  try {
    aggregate({MetricRecord{}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kAggregation);
  }
}

}  // namespace
}  // namespace poxbench
