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

// poxbench command-line tool.
//
// Exit codes: 0 success, 1 usage error, 2 data or contract error,
// 3 provenance audit failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "poxbench/config.hpp"
#include "poxbench/report.hpp"
#include "poxbench/synthetic.hpp"

namespace fs = std::filesystem;
using namespace poxbench;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitLeakage = 3;

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::kUsage: return kExitUsage;
    case ErrorKind::kLeakage: return kExitLeakage;
    default: return kExitData;
  }
}

bool g_verbose = false;

void note(const std::string& msg) {
  if (g_verbose) std::cerr << msg << '\n';
}

void print_warnings(const std::vector<std::string>& warnings) {
  if (!warnings.empty()) std::cerr << fmt::format("{} warning(s)\n", warnings.size());
  for (const auto& w : warnings) note("warning: " + w);
}

// Experiment settings settable from the command line. Only flags the user
// actually passed override the config file.
struct ExperimentFlags {
  std::string config;
  std::string name, manifest, variant, protocol, models, smoteenn_mode, cache_dir, source, model_path, cache_file;
  int k = 10, copies = 6;
  double holdout = 0.1;
  std::uint64_t seed = 42;
  std::size_t dim = 256;
  unsigned threads = 0;
  std::vector<CLI::Option*> opts;

  void add(CLI::App* app) {
    app->add_option("--config", config, "INI experiment config")->check(CLI::ExistingFile);
    opts = {
        app->add_option("--name", name, "run name (output subdirectory)"),
        app->add_option("--manifest", manifest, "manifest file or class-per-folder image root"),
        app->add_option("--variant", variant, "original | smoteenn | augmented"),
        app->add_option("--protocol", protocol, "honest | leaky"),
        app->add_option("--models", models, "comma-separated subset of logreg,mlp,svm"),
        app->add_option("--smoteenn-mode", smoteenn_mode, "per_fold | whole_pool"),
        app->add_option("--cache-dir", cache_dir, "augmented images and feature caches"),
        app->add_option("--features", source, "stub | backbone | cache"),
        app->add_option("--backbone", model_path, "ONNX backbone for --features backbone"),
        app->add_option("--feature-cache", cache_file, "precomputed features for --features cache"),
        app->add_option("-k,--folds", k, "number of folds"),
        app->add_option("--copies", copies, "augmented copies per training image"),
        app->add_option("--holdout", holdout, "hold-out test fraction"),
        app->add_option("--seed", seed, "master seed"),
        app->add_option("--dim", dim, "stub feature dimension"),
        app->add_option("--threads", threads, "worker threads (0: POXBENCH_THREADS or hardware)"),
    };
  }

  bool given(std::size_t i) const { return opts[i]->count() > 0; }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg = config.empty() ? ExperimentConfig{} : load_experiment_config(config);
    if (given(0)) cfg.name = name;
    if (given(1)) cfg.manifest = manifest;
    if (given(2)) cfg.variant = parse_variant(variant);
    if (given(3)) cfg.protocol = parse_protocol(protocol);
    if (given(4)) {
      cfg.models.clear();
      for (const auto& m : detail::split_list(models)) cfg.models.push_back(parse_model_kind(m));
    }
    if (given(5)) cfg.smoteenn_mode = parse_smoteenn_mode(smoteenn_mode);
    if (given(6)) cfg.cache_dir = cache_dir;
    if (given(7)) {
      cfg = apply_config_ini(cfg, "[features]\nsource = " + source + "\n");
    }
    if (given(8)) cfg.features.backbone.model_path = model_path;
    if (given(9)) cfg.features.cache_file = cache_file;
    if (given(10)) cfg.k = k;
    if (given(11)) cfg.augment.copies_per_image = copies;
    if (given(12)) cfg.holdout_fraction = holdout;
    if (given(13)) cfg.seed = seed;
    if (given(14)) cfg.features.stub.dim = dim;
    if (given(15)) cfg.threads = threads;
    if (cfg.manifest.empty()) throw Error(ErrorKind::kUsage, "no manifest: pass --manifest or set experiment.manifest");
    if (cfg.name.empty() || cfg.name.find_first_of(" /\\,") != std::string::npos) {
      throw Error(ErrorKind::kUsage, "run name must be non-empty without spaces, commas or slashes");
    }
    return cfg;
  }
};

// Features of manifest rows plus their labels.
struct LoadedFeatures {
  DatasetManifest manifest;
  SampleMatrix<float> X;
  std::vector<int> y;
  std::vector<std::size_t> ids;
};

LoadedFeatures load_features(const std::string& features, const std::string& manifest) {
  LoadedFeatures out;
  Warnings w;
  out.manifest = load_manifest(manifest, &w);
  print_warnings(w.messages);
  auto fm = cache_load(features);
  for (auto id : fm.row_ids) {
    if (id >= out.manifest.size()) {
      throw Error(ErrorKind::kInput, fmt::format("feature row id {} outside the manifest ({} records)", id,
                                                 out.manifest.size()));
    }
    out.y.push_back(out.manifest.records[id].label);
  }
  out.ids = fm.row_ids;
  out.X = std::move(fm.data);
  return out;
}

std::string digest_header(const std::string& echo) { return fmt::format("# config_digest={}\n", sha256_hex(echo)); }

// ---------------------------------------------------------------------------

int run_synth(std::string out, std::size_t images, std::uint64_t seed, double label_noise, double nuisance,
              double amplitude, int size) {
  SyntheticCorpusConfig sc;
  sc.counts = scaled_counts(kMsidCounts, images);
  sc.seed = seed;
  sc.label_noise = label_noise;
  sc.nuisance = nuisance;
  sc.class_amplitude = amplitude;
  sc.size = size;
  const auto corpus = generate_corpus(out, sc);
  std::cout << corpus.manifest_path.string() << '\n';
  return kExitOk;
}

int run_extract(const ExperimentFlags& flags, const std::string& out) {
  const auto cfg = flags.resolve();
  Warnings w;
  const auto m = load_manifest(cfg.manifest, &w);
  print_warnings(w.messages);
  if (cfg.features.source == FeatureSource::kCache) throw Error(ErrorKind::kUsage, "extract needs stub or backbone");
  const auto fm = detail::extract_with(m, cfg.features, worker_count(cfg.threads));
  cache_store(fm, out);
  std::cout << fmt::format("{} rows x {} features -> {}\n", fm.rows(), fm.dim(), out);
  return kExitOk;
}

int run_augment(const ExperimentFlags& flags, const std::string& out) {
  auto cfg = flags.resolve();
  Warnings w;
  const auto m = load_manifest(cfg.manifest, &w);
  print_warnings(w.messages);
  std::vector<std::size_t> all(m.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto aug = augment_training_set(m, all, cfg.augment, cfg.seed, out, worker_count(cfg.threads));
  const auto path = fs::path(out) / "manifest.tsv";
  write_manifest(aug, path);
  std::cout << fmt::format("{} originals + {} copies -> {}\n", m.size(), aug.size() - m.size(), path.string());
  return kExitOk;
}

int run_resample(const std::string& features, const std::string& manifest, const std::string& out, int k_smote,
                 int k_enn, std::uint64_t seed) {
  auto data = load_features(features, manifest);
  ResampleConfig rc;
  rc.k_smote = k_smote;
  rc.k_enn = k_enn;
  rc.seed = seed;
  Warnings w;
  const auto res = smoteenn(LabeledFeatures<float>::from(data.X, data.y, data.ids), rc, &w);
  print_warnings(w.messages);
  std::string text = digest_header(fmt::format("resample features={} k_smote={} k_enn={} seed={}",
                                               sha256_hex(read_file_bytes(features)), k_smote, k_enn, seed));
  text += "id,synthetic,parent_id,neighbor_id,u,label";
  for (Eigen::Index j = 0; j < res.data.X.cols(); ++j) text += fmt::format(",f{}", j);
  text += "\n";
  for (std::size_t r = 0; r < res.data.rows(); ++r) {
    const auto& p = res.data.provenance[r];
    text += fmt::format("{},{},{},{},{},{}", p.id, p.synthetic ? 1 : 0, p.parent_id, p.neighbor_id, p.u, res.data.y[r]);
    for (Eigen::Index j = 0; j < res.data.X.cols(); ++j) text += fmt::format(",{}", res.data.X(static_cast<Eigen::Index>(r), j));
    text += "\n";
  }
  write_file_atomic(out, text);
  std::cout << fmt::format("counts before {} after smote {} after enn {} -> {}\n", fmt::join(res.counts_before, "/"),
                           fmt::join(res.counts_after_smote, "/"), fmt::join(res.data.class_counts(res.counts_before.size()), "/"),
                           out);
  return kExitOk;
}

int run_train(const ExperimentFlags& flags, const std::string& features, const std::string& model,
              const std::string& out) {
  ExperimentConfig cfg = flags.config.empty() ? ExperimentConfig{} : load_experiment_config(flags.config);
  if (flags.given(13)) cfg.seed = flags.seed;
  const auto data = load_features(features, flags.manifest.empty() ? cfg.manifest.string() : flags.manifest);
  auto mc = cfg.model_configs;
  mc.set_seed(cfg.seed);
  Warnings w;
  const auto trained = train_model(parse_model_kind(model), data.X, data.y, mc, &w);
  print_warnings(w.messages);
  save_model(trained, out);
  std::cout << describe(trained) << '\n';
  return kExitOk;
}

int run_eval(const std::string& features, const std::string& manifest, const std::string& model,
             const std::string& out) {
  const auto data = load_features(features, manifest);
  const auto trained = load_model(model);
  const auto pred = predict(trained, data.X);
  Warnings w;
  const auto r = evaluate(data.y, pred, data.manifest.class_count(), &w);
  print_warnings(w.messages);
  std::string text = digest_header(fmt::format("eval features={} model={}", sha256_hex(read_file_bytes(features)),
                                               sha256_hex(read_file_bytes(model))));
  text += "accuracy,precision_macro,recall_macro,f1_macro,kappa\n";
  text += fmt::format("{},{},{},{},{}\n", r.accuracy, r.precision_macro, r.recall_macro, r.f1_macro, r.kappa);
  if (!out.empty()) write_file_atomic(out, text);
  std::cout << fmt::format("accuracy {:.2f}%  precision {:.2f}%  recall {:.2f}%  f1 {:.2f}%  kappa {:.2f}%\n",
                           100 * r.accuracy, 100 * r.precision_macro, 100 * r.recall_macro, 100 * r.f1_macro,
                           100 * r.kappa);
  return kExitOk;
}

int run_experiment_cmd(const ExperimentFlags& flags, const std::string& out, bool with_honest) {
  const auto cfg = flags.resolve();
  cfg.validate();
  const fs::path dir = fs::path(out) / cfg.name;
  try {
    const auto rep = run_experiment(cfg);
    std::optional<ExperimentReport> honest;
    if (with_honest && rep.leaky) {
      auto hc = cfg;
      hc.protocol = Protocol::kHonest;
      hc.name = cfg.name + "_honest";
      honest = run_experiment(hc);
      write_report(*honest, fs::path(out) / hc.name);
    }
    write_report(rep, dir, honest ? &*honest : nullptr);
    print_warnings(rep.warnings);
    std::cout << fmt::format("{}\naudit {}\n", dir.string(), rep.audit.summary());
    if (!rep.audit.passed) {
      std::cerr << "error: provenance audit failed (leaky protocol); artifacts written to " << dir.string() << '\n';
      return kExitLeakage;
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kLeakage) {
      fs::create_directories(dir);
      write_file_atomic(dir / "audit.txt", digest_header(cfg.describe()) + e.what() + std::string("\n"));
    }
    throw;
  }
  return kExitOk;
}

int run_compare(const std::vector<std::string>& runs, const std::string& out, std::size_t exact_max_total) {
  std::vector<RunSummary> summaries;
  for (const auto& r : runs) summaries.push_back(read_run(r));
  MannWhitneyOptions opt;
  opt.exact_max_total = exact_max_total;
  std::string header = "compare";
  for (const auto& s : summaries) header += " " + s.config_digest;
  const auto text = digest_header(header) + render_comparison(compare_variants(summaries, opt));
  if (!out.empty()) write_file_atomic(out, text);
  std::cout << text;
  return kExitOk;
}

int run_report(const std::string& run, const std::string& out) {
  const auto s = read_run(run);
  std::vector<BoxSummary> boxes;
  for (const auto& [model, v] : s.kappa) boxes.push_back(box_summary(model, v));
  const fs::path dir = out.empty() ? fs::path(run) : fs::path(out);
  fs::create_directories(dir);
  write_file_atomic(dir / "boxplot.csv", boxplot_csv(boxes, s.config_digest));
  write_file_atomic(dir / "boxplot.svg", boxplot_svg(boxes, fmt::format("Cohen's kappa per fold: {} ({})", s.name, s.variant)));
  for (const auto& b : boxes) {
    std::cout << fmt::format("{:<8} min {:.4f} q1 {:.4f} median {:.4f} q3 {:.4f} max {:.4f}\n", b.model, b.min, b.q1,
                             b.median, b.q3, b.max);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"poxbench: leakage-safe skin-lesion classification benchmark"};
  app.require_subcommand(1, 1);
  app.add_flag("-v,--verbose", g_verbose, "print every warning to stderr");

  std::string out = "out";

  auto* synth = app.add_subcommand("synth", "generate a synthetic image corpus");
  std::string synth_out;
  std::size_t synth_images = 400;
  std::uint64_t synth_seed = 1;
  double label_noise = 0.0, nuisance = 0.05, amplitude = 0.35;
  int size = 32;
  synth->add_option("--out", synth_out, "corpus directory")->required();
  synth->add_option("--images", synth_images, "total images (class shares follow the reference histogram)");
  synth->add_option("--seed", synth_seed, "corpus seed");
  synth->add_option("--label-noise", label_noise, "fraction of records filed under another class");
  synth->add_option("--nuisance", nuisance, "strength of the label-independent per-image field");
  synth->add_option("--amplitude", amplitude, "strength of the class signal");
  synth->add_option("--size", size, "image side in pixels");

  ExperimentFlags extract_flags, augment_flags, train_flags, exp_flags;
  auto* extract = app.add_subcommand("extract", "extract features of every manifest image into a cache file");
  extract_flags.add(extract);
  std::string extract_out;
  extract->add_option("--out", extract_out, "feature cache file")->required();

  auto* augment = app.add_subcommand("augment", "write augmented copies of every manifest image");
  augment_flags.add(augment);
  std::string augment_out;
  augment->add_option("--out", augment_out, "output directory")->required();

  auto* resample = app.add_subcommand("resample", "SMOTEENN on a feature cache");
  std::string rs_features, rs_manifest, rs_out;
  int k_smote = 5, k_enn = 3;
  std::uint64_t rs_seed = 42;
  resample->add_option("--features", rs_features, "feature cache file")->required();
  resample->add_option("--manifest", rs_manifest, "manifest the cache was extracted from")->required();
  resample->add_option("--out", rs_out, "resampled rows as CSV")->required();
  resample->add_option("--k-smote", k_smote, "SMOTE neighbours");
  resample->add_option("--k-enn", k_enn, "ENN neighbours");
  resample->add_option("--seed", rs_seed, "resampling seed");

  auto* train = app.add_subcommand("train", "train one classifier on a feature cache");
  train_flags.add(train);
  std::string tr_features, tr_model = "logreg", tr_out;
  train->add_option("--feature-file", tr_features, "feature cache file")->required();
  train->add_option("--model", tr_model, "logreg | mlp | svm");
  train->add_option("--out", tr_out, "model file")->required();

  auto* eval = app.add_subcommand("eval", "score a trained model on a feature cache");
  std::string ev_features, ev_manifest, ev_model, ev_out;
  eval->add_option("--features", ev_features, "feature cache file")->required();
  eval->add_option("--manifest", ev_manifest, "manifest the cache was extracted from")->required();
  eval->add_option("--model", ev_model, "model file")->required();
  eval->add_option("--out", ev_out, "metrics CSV");

  auto* experiment = app.add_subcommand("experiment", "full cross-validated experiment");
  exp_flags.add(experiment);
  bool with_honest = false;
  experiment->add_option("--out", out, "output root; artifacts go to <out>/<name>/");
  experiment->add_flag("--with-honest", with_honest, "with --protocol leaky, also run the honest protocol and report the gap");

  auto* compare = app.add_subcommand("compare", "Mann-Whitney comparison of finished runs");
  std::vector<std::string> runs;
  std::string cmp_out;
  std::size_t exact_max_total = 16;
  compare->add_option("runs", runs, "run directories")->required()->expected(2, -1);
  compare->add_option("--out", cmp_out, "comparison CSV");
  compare->add_option("--exact-max-total", exact_max_total, "largest combined size for exact p-values");

  auto* report = app.add_subcommand("report", "boxplot data of a finished run");
  std::string rp_run, rp_out;
  report->add_option("run", rp_run, "run directory")->required();
  report->add_option("--out", rp_out, "output directory (default: the run directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth) return run_synth(synth_out, synth_images, synth_seed, label_noise, nuisance, amplitude, size);
    if (*extract) return run_extract(extract_flags, extract_out);
    if (*augment) return run_augment(augment_flags, augment_out);
    if (*resample) return run_resample(rs_features, rs_manifest, rs_out, k_smote, k_enn, rs_seed);
    if (*train) return run_train(train_flags, tr_features, tr_model, tr_out);
    if (*eval) return run_eval(ev_features, ev_manifest, ev_model, ev_out);
    if (*experiment) return run_experiment_cmd(exp_flags, out, with_honest);
    if (*compare) return run_compare(runs, cmp_out, exact_max_total);
    if (*report) return run_report(rp_run, rp_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
