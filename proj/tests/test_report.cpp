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

#include <fstream>

#include <gtest/gtest.h>

#include "poxbench/report.hpp"
#include "poxbench/synthetic.hpp"
#include "test_util.hpp"

namespace poxbench {
namespace {

// numpy.percentile (linear) on the same vectors.
TEST(Quantile, MatchesFrozenReference) {
  const std::vector<double> a = {3, 1, 4, 1, 5, 9, 2, 6};
  EXPECT_DOUBLE_EQ(quantile_type7(a, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile_type7(a, 0.50), 3.5);
  EXPECT_DOUBLE_EQ(quantile_type7(a, 0.75), 5.25);
  EXPECT_DOUBLE_EQ(quantile_type7(a, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile_type7(a, 1.0), 9.0);
  EXPECT_DOUBLE_EQ(quantile_type7({2.5}, 0.3), 2.5);
  EXPECT_THROW(quantile_type7({}, 0.5), Error);
}

TEST(Quantile, MedianAgreesWithSortMedian) {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(1 + rng.below(15));
    for (auto& x : v) x = rng.normal();
    EXPECT_NEAR(quantile_type7(v, 0.5), median(v), 1e-15);
  }
}

TEST(BoxSummary, TukeyWhiskersAndOutliers) {
  const auto b = box_summary("m", {0.7, 0.72, 0.71, 0.69, 0.70, 0.73, 0.71, 0.95, 0.40, 0.70});
  EXPECT_NEAR(b.q1, 0.7, 1e-12);
  EXPECT_NEAR(b.median, 0.705, 1e-12);
  EXPECT_NEAR(b.q3, 0.7175, 1e-12);
  EXPECT_DOUBLE_EQ(b.min, 0.40);
  EXPECT_DOUBLE_EQ(b.max, 0.95);
  EXPECT_DOUBLE_EQ(b.whisker_low, 0.69);
  EXPECT_DOUBLE_EQ(b.whisker_high, 0.73);
  EXPECT_EQ(b.outliers, (std::vector<double>{0.40, 0.95}));
}

TEST(BoxSummary, NoOutliersMeansWhiskersAreExtremes) {
  const auto b = box_summary("m", {1, 2, 3, 4, 5});
  EXPECT_TRUE(b.outliers.empty());
  EXPECT_EQ(b.whisker_low, 1);
  EXPECT_EQ(b.whisker_high, 5);
}

std::string head_line(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

class ReportFiles : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir;
    SyntheticCorpusConfig sc;
    sc.counts = scaled_counts(kMsidCounts, 80);
    const auto corpus = generate_corpus(dir_->path() / "corpus", sc);
    ExperimentConfig cfg;
    cfg.name = "files";
    cfg.manifest = corpus.manifest_path;
    cfg.k = 4;
    cfg.features.stub.dim = 16;
    cfg.models = {ModelKind::kLogReg, ModelKind::kSvm};
    cfg.cache_dir = dir_->path() / "cache";
    rep_ = new ExperimentReport(run_experiment(cfg));
    write_report(*rep_, dir_->path() / "out");
  }
  static void TearDownTestSuite() {
    delete rep_;
    delete dir_;
  }
  static std::filesystem::path out() { return dir_->path() / "out"; }

  static TempDir* dir_;
  static ExperimentReport* rep_;
};

TempDir* ReportFiles::dir_ = nullptr;
ExperimentReport* ReportFiles::rep_ = nullptr;

TEST_F(ReportFiles, EveryArtifactCarriesTheConfigDigest) {
  const std::string tag = "# config_digest=" + rep_->config_digest;
  for (const char* f : {"report.txt", "significance.csv", "boxplot.csv", "audit.txt", "warnings.txt",
                        "kappa_logreg.csv", "kappa_svm.csv"}) {
    SCOPED_TRACE(f);
    EXPECT_EQ(head_line(out() / f), tag);
  }
  EXPECT_EQ(head_line(out() / "metrics.csv").rfind(tag + " ", 0), 0u);
  EXPECT_TRUE(std::filesystem::exists(out() / "timings.log"));
  EXPECT_TRUE(std::filesystem::exists(out() / "boxplot.svg"));
}

TEST_F(ReportFiles, MetricsRoundTripExactly) {
  const auto run = read_run(out());
  EXPECT_EQ(run.name, "files");
  EXPECT_EQ(run.variant, "original");
  EXPECT_EQ(run.protocol, "honest");
  EXPECT_EQ(run.config_digest, rep_->config_digest);
  ASSERT_EQ(run.kappa.size(), 2u);
  EXPECT_EQ(run.kappa.at("logreg"), rep_->kappas("logreg"));
  EXPECT_EQ(run.kappa.at("svm"), rep_->kappas("svm"));
}

TEST_F(ReportFiles, ReportShowsBothSpreadTables) {
  const auto text = read_file_bytes(out() / "report.txt");
  EXPECT_NE(text.find("mean ± SD over 4 folds"), std::string::npos);
  EXPECT_NE(text.find("mean ± SE over 4 folds"), std::string::npos);
  EXPECT_NE(text.find("Shapiro-Wilk"), std::string::npos);
  EXPECT_NE(text.find("Mann-Whitney"), std::string::npos);
  EXPECT_NE(text.find("PASS"), std::string::npos);
  EXPECT_EQ(text.find("LEAKY"), std::string::npos);
  const auto& s = rep_->aggregates.at("logreg")[4];
  EXPECT_NE(text.find(format_percent(s.mean, s.sd)), std::string::npos);
  EXPECT_NE(text.find(format_percent(s.mean, s.se)), std::string::npos);
}

TEST_F(ReportFiles, SignificanceCsvListsEveryPair) {
  const auto text = read_file_bytes(out() / "significance.csv");
  EXPECT_NE(text.find("pairwise,logreg,svm,"), std::string::npos);
}

TEST(ReadRun, RejectsForeignFiles) {
  TempDir dir;
  write_file_atomic(dir.path() / "metrics.csv", "a,b,c\n");
  EXPECT_THROW(read_run(dir.path()), Error);
  EXPECT_THROW(read_run(dir.path() / "none"), Error);
  write_file_atomic(dir.path() / "metrics.csv",
                    "# config_digest=x name=n protocol=honest variant=original\nheader\ntest,original,logreg,0,1,1\n");
  EXPECT_THROW(read_run(dir.path()), Error);
}

}  // namespace
}  // namespace poxbench
