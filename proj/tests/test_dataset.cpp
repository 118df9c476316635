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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "poxbench/dataset.hpp"
#include "poxbench/synthetic.hpp"
#include "test_util.hpp"

namespace poxbench {
namespace {

namespace fs = std::filesystem;

// Independent apportionment oracle in exact integer arithmetic for fractions
// of the form num/den: floor quotas plus largest remainders, lower class
// first on equal remainders.
std::vector<std::size_t> oracle_apportion(const std::vector<std::size_t>& counts, std::size_t num, std::size_t den) {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  const std::size_t total = (2 * num * n + den) / (2 * den);  // round half up
  std::vector<std::size_t> q(counts.size());
  std::vector<std::size_t> order(counts.size());
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    q[c] = num * counts[c] / den;
    assigned += q[c];
    order[c] = c;
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return (num * counts[a]) % den > (num * counts[b]) % den;
  });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++q[order[i]];
  return q;
}

TEST(Apportion, MatchesExactOracleOnReferenceHistogram) {
  const auto expected = oracle_apportion(kMsidCounts, 1, 10);
  EXPECT_EQ(expected, (std::vector<std::size_t>{29, 9, 11, 28}));
  EXPECT_EQ(apportion(kMsidCounts, 0.10), expected);
}

TEST(Apportion, MatchesExactOracleOnRandomHistograms) {
  Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::size_t> counts(2 + rng.below(5));
    for (auto& c : counts) c = 1 + rng.below(400);
    const std::size_t den = 20;
    const std::size_t num = 1 + rng.below(den - 1);
    EXPECT_EQ(apportion(counts, static_cast<double>(num) / den), oracle_apportion(counts, num, den))
        << "trial " << trial;
  }
}

TEST(LoadManifest, MissingRootIsConfigError) {
  try {
    load_manifest("/nonexistent/poxbench/root");
    FAIL() << "expected configuration error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST(LoadManifest, EmptyDirectoryGivesEmptyManifest) {
  TempDir dir;
  const auto m = load_manifest(dir.path());
  EXPECT_EQ(m.size(), 0u);
  EXPECT_EQ(m.class_count(), 0u);
}

TEST(LoadManifest, SyntheticCorpusCountsMatchFilesOnDisk) {
  TempDir dir;
  SyntheticCorpusConfig cfg;
  cfg.counts = {10, 10, 10, 10};
  cfg.size = 16;
  generate_corpus(dir.path(), cfg);

  // Count files independently of the loader.
  std::map<std::string, std::size_t> on_disk;
  for (const auto& e : fs::recursive_directory_iterator(dir.path())) {
    if (e.path().extension() == ".png") ++on_disk[e.path().parent_path().filename().string()];
  }
  ASSERT_EQ(on_disk.size(), 4u);

  for (const auto& root : {dir.path(), dir.path() / "manifest.tsv"}) {
    const auto m = load_manifest(root);
    EXPECT_EQ(m.size(), 40u);
    const auto counts = m.class_counts();
    for (const auto& c : m.classes) {
      EXPECT_EQ(counts[static_cast<std::size_t>(c.id)], on_disk[c.name]) << c.name;
      EXPECT_EQ(counts[static_cast<std::size_t>(c.id)], 10u);
    }
    for (const auto& r : m.records) {
      EXPECT_EQ(r.width, 16);
      EXPECT_EQ(r.checksum.size(), 64u);
    }
  }
}

TEST(LoadManifest, ManifestFileSkipsCommentsAndUndecodableImages) {
  TempDir dir;
  SyntheticCorpusConfig cfg;
  cfg.counts = {2, 2};
  cfg.class_names = {"a", "b"};
  cfg.size = 8;
  generate_corpus(dir.path(), cfg);
  std::ofstream(dir.path() / "broken.png") << "not an image";
  std::ofstream(dir.path() / "list.tsv") << "# comment line\n"
                                         << "a/a_00000.png\ta\n"
                                         << "\n"
                                         << "broken.png\tb\n"
                                         << "b/b_00002.png\tb\n";
  Warnings w;
  const auto m = load_manifest(dir.path() / "list.tsv", &w);
  EXPECT_EQ(m.size(), 2u);
  ASSERT_EQ(m.skipped.size(), 1u);
  EXPECT_EQ(w.size(), 1u);
  EXPECT_EQ(m.class_count(), 2u);
  EXPECT_EQ(m.classes[0].name, "a");
  EXPECT_EQ(m.classes[1].name, "b");
}

TEST(LoadManifest, MalformedRowIsConfigError) {
  TempDir dir;
  std::ofstream(dir.path() / "bad.tsv") << "no-tab-here\n";
  try {
    load_manifest(dir.path() / "bad.tsv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

// ---------------------------------------------------------------------------

void expect_proportional(const std::vector<std::size_t>& subset_counts, std::size_t subset_size,
                         const std::vector<std::size_t>& pool_counts, std::size_t pool_size, double tol = 1.0) {
  for (std::size_t c = 0; c < pool_counts.size(); ++c) {
    const double expected = static_cast<double>(subset_size) * pool_counts[c] / pool_size;
    EXPECT_LE(std::abs(static_cast<double>(subset_counts[c]) - expected), tol + 1e-12)
        << "class " << c << " count " << subset_counts[c] << " expected " << expected;
  }
}

std::vector<std::size_t> histogram(const DatasetManifest& m, const std::vector<std::size_t>& idx) {
  std::vector<std::size_t> h(m.class_count(), 0);
  for (auto i : idx) ++h[static_cast<std::size_t>(m.records[i].label)];
  return h;
}

TEST(StratifiedHoldout, ReferenceHistogramGives77TestRecords) {
  const auto m = fake_manifest(kMsidCounts);
  const auto plan = stratified_holdout(m, 0.10, 42);
  EXPECT_EQ(plan.test_indices.size(), 77u);
  EXPECT_EQ(plan.train_indices.size(), 693u);
  EXPECT_EQ(histogram(m, plan.test_indices), (std::vector<std::size_t>{29, 9, 11, 28}));
  expect_proportional(histogram(m, plan.test_indices), 77, kMsidCounts, 770);

  std::vector<std::size_t> all = plan.test_indices;
  all.insert(all.end(), plan.train_indices.begin(), plan.train_indices.end());
  std::sort(all.begin(), all.end());
  EXPECT_EQ(std::adjacent_find(all.begin(), all.end()), all.end());
  EXPECT_EQ(all.size(), 770u);
}

TEST(StratifiedHoldout, SingleClass) {
  const auto m = fake_manifest({100});
  const auto plan = stratified_holdout(m, 0.10, 1);
  EXPECT_EQ(plan.test_indices.size(), 10u);
}

TEST(StratifiedHoldout, EmptyTestClassNamesTheClass) {
  const auto m = fake_manifest({100, 3}, {"big", "tiny"});
  try {
    stratified_holdout(m, 0.10, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kStratification);
    EXPECT_NE(std::string(e.what()).find("tiny"), std::string::npos);
  }
}

TEST(StratifiedHoldout, RejectsFractionOutsideUnitInterval) {
  const auto m = fake_manifest({10, 10});
  EXPECT_THROW(stratified_holdout(m, 0.0, 1), Error);
  EXPECT_THROW(stratified_holdout(m, 1.0, 1), Error);
}

TEST(StratifiedKFold, ReferenceTrainPoolFoldsOf69Or70) {
  const auto m = fake_manifest(kMsidCounts);
  const auto plan = stratified_kfold(stratified_holdout(m, 0.10, 42), m, 10, 42);
  ASSERT_TRUE(plan.has_folds());
  const auto pool = histogram(m, plan.train_indices);
  EXPECT_EQ(pool, (std::vector<std::size_t>{264, 82, 96, 251}));
  std::set<std::size_t> seen;
  for (int f = 0; f < 10; ++f) {
    const auto fold = plan.fold_members(f);
    EXPECT_TRUE(fold.size() == 69 || fold.size() == 70) << fold.size();
    const auto training = plan.training_members(f);
    EXPECT_EQ(fold.size() + training.size(), 693u);
    EXPECT_NEAR(static_cast<double>(training.size()), 623.0, 1.0);
    expect_proportional(histogram(m, fold), fold.size(), pool, 693);
    for (auto i : fold) EXPECT_TRUE(seen.insert(i).second);
  }
  EXPECT_EQ(seen.size(), 693u);
}

TEST(StratifiedKFold, EachClassSplitsWithinOneAcrossFolds) {
  // Exhaustive per-class check: every class count per fold is floor or ceil of n_c / k.
  const auto m = fake_manifest(kMsidCounts);
  const auto plan = stratified_kfold(stratified_holdout(m, 0.10, 3), m, 10, 3);
  const auto pool = histogram(m, plan.train_indices);
  for (int f = 0; f < 10; ++f) {
    const auto h = histogram(m, plan.fold_members(f));
    for (std::size_t c = 0; c < pool.size(); ++c) {
      EXPECT_GE(h[c], pool[c] / 10);
      EXPECT_LE(h[c], (pool[c] + 9) / 10);
    }
  }
}

TEST(StratifiedKFold, TenSamplesTenFolds) {
  const auto m = fake_manifest({10});
  SplitPlan plan;
  for (std::size_t i = 0; i < 10; ++i) plan.train_indices.push_back(i);
  plan = stratified_kfold(plan, m, 10, 5);
  for (int f = 0; f < 10; ++f) EXPECT_EQ(plan.fold_members(f).size(), 1u);
}

TEST(StratifiedKFold, TooManyFoldsIsConfigError) {
  const auto m = fake_manifest({5});
  SplitPlan plan;
  for (std::size_t i = 0; i < 5; ++i) plan.train_indices.push_back(i);
  try {
    stratified_kfold(plan, m, 6, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
  EXPECT_THROW(stratified_kfold(plan, m, 1, 1), Error);
}

TEST(StratifiedKFold, WarnsWhenClassSmallerThanK) {
  const auto m = fake_manifest({40, 4});
  SplitPlan plan;
  for (std::size_t i = 0; i < 44; ++i) plan.train_indices.push_back(i);
  Warnings w;
  stratified_kfold(plan, m, 5, 1, &w);
  EXPECT_EQ(w.size(), 1u);
}

TEST(SplitPlan, DeterministicAndSeedSensitive) {
  const auto m = fake_manifest(kMsidCounts);
  const auto a = stratified_kfold(stratified_holdout(m, 0.1, 9), m, 10, 9).serialize();
  const auto b = stratified_kfold(stratified_holdout(m, 0.1, 9), m, 10, 9).serialize();
  const auto c = stratified_kfold(stratified_holdout(m, 0.1, 10), m, 10, 10).serialize();
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(SplitPlan, PropertyStratificationOnRandomHistograms) {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> counts(2 + rng.below(4));
    for (auto& c : counts) c = 12 + rng.below(300);
    const auto m = fake_manifest(counts);
    const int k = 2 + static_cast<int>(rng.below(9));
    const auto plan = stratified_kfold(stratified_holdout(m, 0.1, trial), m, k, trial);
    const auto pool = histogram(m, plan.train_indices);
    expect_proportional(histogram(m, plan.test_indices), plan.test_indices.size(), counts, m.size());
    std::size_t lo = SIZE_MAX, hi = 0;
    for (int f = 0; f < k; ++f) {
      const auto fold = plan.fold_members(f);
      lo = std::min(lo, fold.size());
      hi = std::max(hi, fold.size());
      expect_proportional(histogram(m, fold), fold.size(), pool, plan.train_indices.size());
    }
    EXPECT_LE(hi - lo, 1u);
  }
}

TEST(SplitPlan, PermutationEquivariance) {
  const auto m = fake_manifest(kMsidCounts);
  std::vector<std::size_t> perm(m.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(77);
  rng.shuffle(perm);
  // shuffled.records[j] = m.records[perm[j]]
  const auto shuffled = m.subset(perm);

  const auto a = stratified_kfold(stratified_holdout(m, 0.1, 5), m, 10, 5);
  const auto b = stratified_kfold(stratified_holdout(shuffled, 0.1, 5), shuffled, 10, 5);

  std::set<std::size_t> a_test(a.test_indices.begin(), a.test_indices.end());
  std::set<std::size_t> b_test_mapped;
  for (auto j : b.test_indices) b_test_mapped.insert(perm[j]);
  EXPECT_EQ(a_test, b_test_mapped);

  std::map<std::size_t, int> a_fold, b_fold;
  for (std::size_t i = 0; i < a.train_indices.size(); ++i) a_fold[a.train_indices[i]] = a.fold_of[i];
  for (std::size_t i = 0; i < b.train_indices.size(); ++i) b_fold[perm[b.train_indices[i]]] = b.fold_of[i];
  EXPECT_EQ(a_fold, b_fold);
}

}  // namespace
}  // namespace poxbench
