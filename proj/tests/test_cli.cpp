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

#include <sys/wait.h>

#include <cstdlib>

#include <gtest/gtest.h>

#include "poxbench/report.hpp"
#include "test_util.hpp"

namespace poxbench {
namespace {

namespace fs = std::filesystem;

int run(const std::string& args) {
  const std::string cmd = std::string(POXBENCH_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir;
    ASSERT_EQ(run(fmt::format("synth --out {} --images 100 --seed 5", (root() / "corpus").string())), 0);
  }
  static void TearDownTestSuite() { delete dir_; }
  static fs::path root() { return dir_->path(); }
  static std::string manifest() { return (root() / "corpus" / "manifest.tsv").string(); }
  static std::string common() {
    return fmt::format("--manifest {} -k 3 --dim 16 --copies 1 --cache-dir {}", manifest(), (root() / "cache").string());
  }
  static TempDir* dir_;
};

TempDir* Cli::dir_ = nullptr;

TEST_F(Cli, ExperimentWritesTheDocumentedLayout) {
  const auto out = root() / "layout";
  ASSERT_EQ(run(fmt::format("experiment {} --name base --out {}", common(), out.string())), 0);
  for (const char* f : {"report.txt", "metrics.csv", "kappa_logreg.csv", "kappa_mlp.csv", "kappa_svm.csv",
                        "significance.csv", "audit.txt"}) {
    EXPECT_TRUE(fs::exists(out / "base" / f)) << f;
  }
}

TEST_F(Cli, RerunReproducesArtifactBytes) {
  const auto a = root() / "rep_a", b = root() / "rep_b";
  ASSERT_EQ(run(fmt::format("experiment {} --variant smoteenn --name r --out {} --threads 1", common(), a.string())), 0);
  ASSERT_EQ(run(fmt::format("experiment {} --variant smoteenn --name r --out {} --threads 2", common(), b.string())), 0);
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(a / "r")) {
    if (e.path().filename() == "timings.log") continue;
    EXPECT_EQ(read_file_bytes(e.path()), read_file_bytes(b / "r" / e.path().filename())) << e.path();
    ++compared;
  }
  EXPECT_GE(compared, 10u);
}

TEST_F(Cli, LeakyProtocolNeedsAugmentedVariant) {
  EXPECT_EQ(run(fmt::format("experiment {} --protocol leaky --variant original --out {}", common(),
                            (root() / "x").string())),
            1);
}

TEST_F(Cli, LeakyRunWritesArtifactsAndSignalsTheAudit) {
  const auto out = root() / "leaky";
  EXPECT_EQ(run(fmt::format("experiment {} --protocol leaky --variant augmented --models logreg --name lk --out {}",
                            common(), out.string())),
            3);
  EXPECT_NE(read_file_bytes(out / "lk" / "report.txt").find("LEAKY PROTOCOL"), std::string::npos);
  EXPECT_NE(read_file_bytes(out / "lk" / "audit.txt").find("FAIL"), std::string::npos);
}

TEST_F(Cli, UsageAndDataErrors) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("experiment --no-such-flag"), 1);
  EXPECT_EQ(run("experiment --variant mixup --manifest " + manifest()), 2);
  EXPECT_EQ(run("experiment --manifest /no/such/dir"), 2);
  EXPECT_EQ(run("compare /no/a /no/b"), 2);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, FlagsWinOverConfig) {
  const auto ini = root() / "run.ini";
  write_file_atomic(ini, fmt::format("[experiment]\nname = fromini\nmanifest = {}\nk = 3\nmodels = svm\n"
                                     "[features]\ndim = 16\n",
                                     manifest()));
  const auto out = root() / "cfg";
  ASSERT_EQ(run(fmt::format("experiment --config {} --models logreg --out {}", ini.string(), out.string())), 0);
  const auto runinfo = read_run(out / "fromini");
  EXPECT_EQ(runinfo.kappa.size(), 1u);
  EXPECT_TRUE(runinfo.kappa.count("logreg"));
  EXPECT_EQ(run(fmt::format("experiment --config {} --out {} --name x", (root() / "missing.ini").string(),
                            out.string())),
            1);
}

TEST_F(Cli, CompareMatchesModuleRecomputation) {
  const auto out = root() / "cmp";
  ASSERT_EQ(run(fmt::format("experiment {} --name a --out {}", common(), out.string())), 0);
  ASSERT_EQ(run(fmt::format("experiment {} --name b --variant augmented --out {}", common(), out.string())), 0);
  ASSERT_EQ(run(fmt::format("experiment {} --name c --variant smoteenn --out {}", common(), out.string())), 0);
  ASSERT_EQ(run(fmt::format("compare {0}/a {0}/b {0}/c --out {0}/cmp.csv", out.string())), 0);
  const auto text = read_file_bytes(out / "cmp.csv");
  const auto rows =
      compare_variants({read_run(out / "a"), read_run(out / "b"), read_run(out / "c")});
  EXPECT_EQ(rows.size(), 9u);
  const auto body = text.substr(text.find('\n') + 1);
  EXPECT_EQ(body, render_comparison(rows));
}

TEST_F(Cli, ReportEmitsBoxplotData) {
  const auto out = root() / "box";
  ASSERT_EQ(run(fmt::format("experiment {} --name b --models logreg,svm --out {}", common(), out.string())), 0);
  ASSERT_EQ(run(fmt::format("report {0}/b --out {0}/plots", out.string())), 0);
  const auto text = read_file_bytes(out / "plots" / "boxplot.csv");
  std::size_t summary = 0, values = 0, pos = 0;
  while ((pos = text.find("\nsummary,", pos)) != std::string::npos) ++summary, ++pos;
  pos = 0;
  while ((pos = text.find("\nvalues,", pos)) != std::string::npos) ++values, ++pos;
  EXPECT_EQ(summary, 2u);
  EXPECT_EQ(values, 2u);
  EXPECT_NE(text.find("type 7"), std::string::npos);
}

TEST_F(Cli, FeatureTrainEvalPipeline) {
  const auto f = (root() / "f.pxf").string(), m = (root() / "m.bin").string();
  ASSERT_EQ(run(fmt::format("extract --manifest {} --dim 16 --out {}", manifest(), f)), 0);
  ASSERT_EQ(run(fmt::format("train --feature-file {} --manifest {} --model svm --out {}", f, manifest(), m)), 0);
  ASSERT_EQ(run(fmt::format("eval --features {} --manifest {} --model {} --out {}/e.csv", f, manifest(), m,
                            root().string())),
            0);
  EXPECT_NE(read_file_bytes(root() / "e.csv").find("kappa"), std::string::npos);
  ASSERT_EQ(run(fmt::format("resample --features {} --manifest {} --out {}/r.csv", f, manifest(), root().string())), 0);
  EXPECT_NE(read_file_bytes(root() / "r.csv").find("parent_id"), std::string::npos);
}

}  // namespace
}  // namespace poxbench
