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

// Experiment orchestration.
//
// Honest protocol: stratified hold-out on original images, stratified k-fold
// on the remaining pool, per-fold preprocessing (augmentation on images or
// SMOTEENN on features) of the training folds only, every model trained per
// fold and scored on the fixed hold-out. A provenance audit traces every
// training row back to original images and fails the run if any of them is
// a test image.
//
// Leaky protocol: the whole corpus is augmented first and the augmented
// corpus is split afterwards, so copies of a test image can sit in training.

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "poxbench/augment.hpp"
#include "poxbench/classifiers.hpp"
#include "poxbench/core.hpp"
#include "poxbench/dataset.hpp"
#include "poxbench/features.hpp"
#include "poxbench/metrics.hpp"
#include "poxbench/resample.hpp"
#include "poxbench/stats.hpp"

namespace poxbench {

enum class Variant { kOriginal, kSmoteenn, kAugmented };
enum class Protocol { kHonest, kLeaky };
enum class SmoteennMode { kPerFold, kWholePool };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::kOriginal: return "original";
    case Variant::kSmoteenn: return "smoteenn";
    case Variant::kAugmented: return "augmented";
  }
  return "?";
}

inline const char* to_string(Protocol p) { return p == Protocol::kHonest ? "honest" : "leaky"; }
inline const char* to_string(SmoteennMode m) { return m == SmoteennMode::kPerFold ? "per_fold" : "whole_pool"; }

inline Variant parse_variant(const std::string& s) {
  if (s == "original") return Variant::kOriginal;
  if (s == "smoteenn") return Variant::kSmoteenn;
  if (s == "augmented") return Variant::kAugmented;
  throw Error(ErrorKind::kConfig, "unknown variant '" + s + "' (original|smoteenn|augmented)");
}

inline Protocol parse_protocol(const std::string& s) {
  if (s == "honest") return Protocol::kHonest;
  if (s == "leaky") return Protocol::kLeaky;
  throw Error(ErrorKind::kConfig, "unknown protocol '" + s + "' (honest|leaky)");
}

inline SmoteennMode parse_smoteenn_mode(const std::string& s) {
  if (s == "per_fold") return SmoteennMode::kPerFold;
  if (s == "whole_pool") return SmoteennMode::kWholePool;
  throw Error(ErrorKind::kConfig, "unknown smoteenn mode '" + s + "' (per_fold|whole_pool)");
}

struct FeatureConfig {
  FeatureSource source = FeatureSource::kStub;
  BackboneSpec backbone;
  StubSpec stub;
  std::filesystem::path cache_file;  // kCache: precomputed features of the manifest originals

  std::string describe() const {
    switch (source) {
      case FeatureSource::kBackbone:
        return fmt::format("backbone model={} digest={}", backbone.model_path.string(), backbone.digest());
      case FeatureSource::kStub:
        return fmt::format("stub dim={} grid={} gain={} jitter={} seed={} digest={}", stub.dim, stub.grid, stub.gain,
                           stub.jitter, stub.seed, stub.digest());
      case FeatureSource::kCache:
        return fmt::format("cache file={}", cache_file.string());
    }
    return "?";
  }
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::filesystem::path manifest;
  FeatureConfig features;
  Variant variant = Variant::kOriginal;
  Protocol protocol = Protocol::kHonest;
  std::vector<ModelKind> models = kAllModels;
  ModelConfigs model_configs;
  int k = 10;
  double holdout_fraction = 0.10;
  std::uint64_t seed = 42;
  AugmentPolicy augment;
  ResampleConfig resample;
  SmoteennMode smoteenn_mode = SmoteennMode::kPerFold;
  SignificanceOptions significance;
  // Three-way split of the augmented corpus under the leaky protocol.
  double leaky_test_fraction = 1738.0 / 8689.0;
  double leaky_validation_fraction = 1391.0 / 8689.0;
  std::filesystem::path cache_dir;  // augmented images and feature caches; empty means a temp dir
  unsigned threads = 0;

  void validate() const {
    if (models.empty()) throw Error(ErrorKind::kConfig, "experiment needs at least one model");
    std::set<ModelKind> seen(models.begin(), models.end());
    if (seen.size() != models.size()) throw Error(ErrorKind::kConfig, "model listed twice");
    if (k < 2) throw Error(ErrorKind::kConfig, fmt::format("fold count {} < 2", k));
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
      throw Error(ErrorKind::kConfig, "holdout_fraction must lie in (0, 1)");
    }
    if (protocol == Protocol::kLeaky && variant != Variant::kAugmented) {
      throw Error(ErrorKind::kUsage, "the leaky protocol requires variant=augmented");
    }
    if (!(leaky_test_fraction > 0.0 && leaky_validation_fraction >= 0.0 &&
          leaky_test_fraction + leaky_validation_fraction < 1.0)) {
      throw Error(ErrorKind::kConfig, "leaky split fractions must be positive and sum below 1");
    }
    if (variant == Variant::kAugmented && features.source == FeatureSource::kCache) {
      throw Error(ErrorKind::kConfig, "augmented variant needs a feature extractor, not a precomputed cache");
    }
    augment.validate();
    resample.validate();
    model_configs.logreg.validate();
    model_configs.mlp.validate();
    model_configs.svm.validate();
  }

  /// Canonical echo; its digest identifies every artifact of the run.
  std::string describe() const {
    std::vector<std::string> names;
    for (auto m : models) names.emplace_back(to_string(m));
    std::string out;
    out += fmt::format("name={}\n", name);
    out += fmt::format("manifest={}\n", manifest.string());
    out += fmt::format("features={}\n", features.describe());
    out += fmt::format("variant={}\nprotocol={}\n", to_string(variant), to_string(protocol));
    out += fmt::format("models={}\n", fmt::join(names, ","));
    out += fmt::format("k={}\nholdout_fraction={}\nseed={}\n", k, holdout_fraction, seed);
    if (variant == Variant::kAugmented) out += fmt::format("augment={}\n", augment.describe());
    if (variant == Variant::kSmoteenn) {
      out += fmt::format("resample=smoteenn k_smote={} k_enn={} mode={}\n", resample.k_smote, resample.k_enn,
                         to_string(smoteenn_mode));
    }
    if (protocol == Protocol::kLeaky) {
      out += fmt::format("leaky_split=test {:.6f} validation {:.6f}\n", leaky_test_fraction, leaky_validation_fraction);
    }
    for (auto m : models) {
      switch (m) {
        case ModelKind::kLogReg: out += model_configs.logreg.describe() + "\n"; break;
        case ModelKind::kMlp: out += model_configs.mlp.describe() + "\n"; break;
        case ModelKind::kSvm: out += model_configs.svm.describe() + "\n"; break;
      }
    }
    out += fmt::format("significance=mann-whitney exact_max_total={} holm={}\n",
                       significance.mann_whitney.exact_max_total, significance.holm ? "on" : "off");
    return out;
  }

  std::string digest() const { return sha256_hex(describe()); }
};

// ---------------------------------------------------------------------------
// Provenance audit.

/// Maps training-row ids to the original manifest records they derive from.
/// Ids below the manifest size are originals; larger ids are augmented copies.
struct ProvenanceIndex {
  std::size_t originals = 0;
  std::vector<std::size_t> derived_source;  // id - originals -> manifest index

  std::optional<std::size_t> root(std::size_t id) const {
    if (id < originals) return id;
    if (id - originals < derived_source.size()) return derived_source[id - originals];
    return std::nullopt;
  }
};

struct AuditResult {
  bool passed = true;
  std::size_t rows_checked = 0;
  std::size_t augmented_rows = 0;
  std::size_t synthetic_rows = 0;
  std::size_t duplicate_content_rows = 0;  // training rows byte-identical to a test row
  std::vector<std::string> violations;     // first few only
  std::size_t violation_count = 0;

  void merge(const AuditResult& o) {
    passed = passed && o.passed;
    rows_checked += o.rows_checked;
    augmented_rows += o.augmented_rows;
    synthetic_rows += o.synthetic_rows;
    duplicate_content_rows += o.duplicate_content_rows;
    violation_count += o.violation_count;
    for (const auto& v : o.violations)
      if (violations.size() < 20) violations.push_back(v);
  }

  std::string summary() const {
    return fmt::format("{}: {} training rows traced ({} augmented, {} synthetic), {} reach a test image, {} "
                       "byte-identical to a test row",
                       passed ? "PASS" : "FAIL", rows_checked, augmented_rows, synthetic_rows, violation_count,
                       duplicate_content_rows);
  }
};

namespace detail {

inline std::string row_bytes(const SampleMatrix<float>& X, Eigen::Index i) {
  return std::string(reinterpret_cast<const char*>(X.row(i).data()), sizeof(float) * static_cast<std::size_t>(X.cols()));
}

}  // namespace detail

/// Traces each training row to its original images. A row whose ancestry
/// contains a test index, or cannot be resolved, is a violation.
inline AuditResult audit_training_rows(const LabeledFeatures<float>& train, const ProvenanceIndex& index,
                                       const std::vector<std::size_t>& test_indices,
                                       const SampleMatrix<float>* test_features = nullptr, const std::string& where = "") {
  const std::unordered_set<std::size_t> test(test_indices.begin(), test_indices.end());
  AuditResult res;
  auto violation = [&](std::string msg) {
    res.passed = false;
    ++res.violation_count;
    if (res.violations.size() < 20) res.violations.push_back(where.empty() ? msg : where + ": " + msg);
  };
  for (std::size_t r = 0; r < train.provenance.size(); ++r) {
    const auto& p = train.provenance[r];
    ++res.rows_checked;
    std::vector<std::size_t> ids;
    if (p.synthetic) {
      ++res.synthetic_rows;
      ids = {p.parent_id, p.neighbor_id};
    } else {
      ids = {p.id};
    }
    for (auto id : ids) {
      const auto root = index.root(id);
      if (!root) {
        violation(fmt::format("row {} has unknown origin id {}", r, id));
        continue;
      }
      if (id >= index.originals && !p.synthetic) ++res.augmented_rows;
      if (test.count(*root)) violation(fmt::format("row {} (id {}) derives from test image {}", r, id, *root));
    }
  }
  if (test_features != nullptr && test_features->rows() > 0) {
    std::unordered_set<std::string> seen;
    for (Eigen::Index i = 0; i < test_features->rows(); ++i) seen.insert(detail::row_bytes(*test_features, i));
    for (Eigen::Index i = 0; i < train.X.rows(); ++i) res.duplicate_content_rows += seen.count(detail::row_bytes(train.X, i));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Report.

struct StageSizes {
  int fold = 0;
  std::size_t originals = 0;      // original training images
  std::size_t augmented = 0;      // derived copies added
  std::size_t after_smote = 0;    // rows after oversampling (0 when not resampled)
  std::size_t after_enn = 0;      // rows after cleaning (0 when not resampled)
  std::size_t train_rows = 0;     // rows the models see
  std::vector<std::size_t> class_counts;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::string config_echo;
  std::string config_digest;
  std::vector<std::string> class_names;
  std::size_t total_records = 0;
  std::size_t test_size = 0;
  std::size_t pool_size = 0;
  std::size_t whole_pool_resampled = 0;        // whole-pool SMOTEENN size, 0 otherwise
  std::vector<std::size_t> fold_sizes;         // validation fold sizes (honest protocol)
  std::vector<std::size_t> test_class_counts;
  std::vector<StageSizes> stages;
  std::vector<MetricRecord> records;             // fixed test set, fold-major then model order
  std::vector<MetricRecord> validation_records;  // validation folds; excluded from headline tables
  std::map<std::string, std::vector<Summary>> aggregates;  // model -> kMetricNames order
  std::optional<SignificanceReport> significance;
  AuditResult audit;
  std::string test_features_digest;
  bool leaky = false;
  std::vector<std::pair<std::string, double>> timings;  // stage -> seconds
  std::vector<std::string> warnings;

  std::vector<std::string> model_names() const {
    std::vector<std::string> out;
    for (auto m : config.models) out.emplace_back(to_string(m));
    return out;
  }

  /// Test-set kappa per fold for `model`, in fold order.
  std::vector<double> kappas(const std::string& model) const {
    std::vector<double> v;
    for (const auto& r : records)
      if (r.model == model) v.push_back(r.kappa);
    return v;
  }

  std::vector<double> values(const std::string& model, const std::string& metric) const {
    std::vector<double> v;
    for (const auto& r : records)
      if (r.model == model) v.push_back(metric_value(r, metric));
    return v;
  }

  double mean(const std::string& model, const std::string& metric) const {
    const auto v = values(model, metric);
    if (v.empty()) throw Error(ErrorKind::kInput, "no records for model '" + model + "'");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  }
};

// ---------------------------------------------------------------------------
// Pipeline.

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline std::string manifest_digest(const DatasetManifest& m) {
  Sha256 h;
  for (const auto& r : m.records) {
    h.update(r.checksum);
    h.update(fmt::format(":{};", r.label));
  }
  return h.hex();
}

inline std::string matrix_digest(const SampleMatrix<float>& X) {
  Sha256 h;
  h.update(fmt::format("{}x{}:", X.rows(), X.cols()));
  h.update(std::string_view(reinterpret_cast<const char*>(X.data()), sizeof(float) * static_cast<std::size_t>(X.size())));
  return h.hex();
}

inline FeatureMatrix extract_with(const DatasetManifest& m, const FeatureConfig& fc, unsigned threads) {
  switch (fc.source) {
    case FeatureSource::kBackbone: return extract_features(m, fc.backbone);
    case FeatureSource::kStub: return stub_extract(m, fc.stub, threads);
    case FeatureSource::kCache: break;
  }
  throw Error(ErrorKind::kConfig, "a precomputed cache cannot extract features for new images");
}

inline std::string spec_digest(const FeatureConfig& fc) {
  return fc.source == FeatureSource::kBackbone ? fc.backbone.digest() : fc.stub.digest();
}

/// Features of every manifest record, row i = record i. Uses or fills the
/// on-disk cache when `cache_dir` is set.
inline SampleMatrix<float> original_features(const DatasetManifest& m, const FeatureConfig& fc,
                                             const std::filesystem::path& cache_dir, unsigned threads) {
  FeatureMatrix fm;
  if (fc.source == FeatureSource::kCache) {
    fm = cache_load(fc.cache_file);
  } else {
    const std::string spec = spec_digest(fc);
    std::filesystem::path file;
    if (!cache_dir.empty()) {
      file = cache_dir / "features" / fmt::format("{}_{}.pxf", spec.substr(0, 16), manifest_digest(m).substr(0, 16));
    }
    bool loaded = false;
    if (!file.empty() && std::filesystem::exists(file)) {
      try {
        fm = cache_load(file, spec);
        loaded = true;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kStaleCache && e.kind() != ErrorKind::kInput) throw;
      }
    }
    if (!loaded) {
      fm = extract_with(m, fc, threads);
      if (!file.empty()) cache_store(fm, file);
    }
  }
  if (fm.rows() != m.size()) {
    throw Error(ErrorKind::kInput, fmt::format("feature matrix has {} rows for {} manifest records", fm.rows(), m.size()));
  }
  SampleMatrix<float> X(fm.data.rows(), fm.data.cols());
  std::vector<bool> seen(m.size(), false);
  for (std::size_t r = 0; r < fm.rows(); ++r) {
    const auto id = fm.row_ids[r];
    if (id >= m.size() || seen[id]) throw Error(ErrorKind::kInput, "feature rows do not cover the manifest");
    seen[id] = true;
    X.row(static_cast<Eigen::Index>(id)) = fm.data.row(static_cast<Eigen::Index>(r));
  }
  return X;
}

inline SampleMatrix<float> gather(const SampleMatrix<float>& X, const std::vector<std::size_t>& rows) {
  SampleMatrix<float> out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

/// Feature store for originals plus augmented copies, addressed by row id.
struct FeatureStore {
  SampleMatrix<float> originals;
  SampleMatrix<float> derived;
  ProvenanceIndex index;
  std::vector<int> derived_label;

  LabeledFeatures<float> rows(const std::vector<std::size_t>& ids, const DatasetManifest& m) const {
    SampleMatrix<float> X(static_cast<Eigen::Index>(ids.size()), originals.cols());
    std::vector<int> y(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto id = ids[i];
      if (id < index.originals) {
        X.row(static_cast<Eigen::Index>(i)) = originals.row(static_cast<Eigen::Index>(id));
        y[i] = m.records[id].label;
      } else {
        X.row(static_cast<Eigen::Index>(i)) = derived.row(static_cast<Eigen::Index>(id - index.originals));
        y[i] = derived_label[id - index.originals];
      }
    }
    return LabeledFeatures<float>::from(std::move(X), std::move(y), ids);
  }
};

/// Augments `sources` once and extracts the derived copies' features.
inline void add_augmented(FeatureStore& store, const DatasetManifest& m, const std::vector<std::size_t>& sources,
                          const ExperimentConfig& cfg, const std::filesystem::path& cache_dir, unsigned threads) {
  const auto aug = augment_training_set(m, sources, cfg.augment, cfg.seed, cache_dir, threads);
  std::vector<std::size_t> derived_pos;
  for (std::size_t i = sources.size(); i < aug.size(); ++i) derived_pos.push_back(i);
  const auto derived_manifest = aug.subset(derived_pos);
  store.index.originals = m.size();
  store.index.derived_source.clear();
  store.derived_label.clear();
  for (const auto& r : derived_manifest.records) {
    store.index.derived_source.push_back(*r.source);
    store.derived_label.push_back(r.label);
  }
  if (derived_manifest.size() == 0) {
    store.derived.resize(0, store.originals.cols());
    return;
  }
  const auto fm = extract_with(derived_manifest, cfg.features, threads);
  if (static_cast<Eigen::Index>(fm.dim()) != store.originals.cols()) {
    throw Error(ErrorKind::kContract, "augmented features differ in width from original features");
  }
  store.derived = fm.data;  // row_ids are positions within derived_manifest
}

inline std::uint64_t fold_seed(std::uint64_t seed, std::uint64_t tag, int fold, std::uint64_t extra = 0) {
  return stream_seed(seed, {tag, static_cast<std::uint64_t>(fold), extra});
}

struct ScoredFold {
  std::vector<MetricRecord> test, validation;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, double>> timings;
};

/// Trains every configured model on `train` and scores it on the test rows
/// (and the validation rows when given).
inline ScoredFold train_and_score(const ExperimentConfig& cfg, const LabeledFeatures<float>& train,
                                  const SampleMatrix<float>& X_test, const std::vector<int>& y_test,
                                  const SampleMatrix<float>* X_val, const std::vector<int>* y_val,
                                  std::size_t num_classes, int fold) {
  ScoredFold out;
  for (std::size_t mi = 0; mi < cfg.models.size(); ++mi) {
    const auto kind = cfg.models[mi];
    ModelConfigs mc = cfg.model_configs;
    mc.set_seed(fold_seed(cfg.seed, 0x6d6f64656cULL, fold, static_cast<std::uint64_t>(kind)));
    Warnings w;
    Stopwatch sw;
    const auto model = train_model(kind, train.X, train.y, mc, &w);
    out.timings.emplace_back(fmt::format("fold{}.train.{}", fold, to_string(kind)), sw.seconds());
    for (auto& msg : w.messages) out.warnings.push_back(fmt::format("fold {} {}: {}", fold, to_string(kind), msg));
    auto score = [&](const SampleMatrix<float>& X, const std::vector<int>& y) {
      Warnings mw;
      auto rec = evaluate(y, predict(model, X), num_classes, &mw);
      for (auto& msg : mw.messages) out.warnings.push_back(fmt::format("fold {} {}: {}", fold, to_string(kind), msg));
      rec.fold = fold;
      rec.model = to_string(kind);
      rec.variant = to_string(cfg.variant);
      return rec;
    };
    out.test.push_back(score(X_test, y_test));
    if (X_val != nullptr && X_val->rows() > 0) out.validation.push_back(score(*X_val, *y_val));
  }
  return out;
}

inline std::filesystem::path resolve_cache_dir(const ExperimentConfig& cfg) {
  if (!cfg.cache_dir.empty()) return cfg.cache_dir;
  if (const char* env = std::getenv("POXBENCH_CACHE"); env != nullptr && *env != '\0') return env;
  return std::filesystem::temp_directory_path() / ("poxbench-" + cfg.digest().substr(0, 16));
}

inline void finish_report(ExperimentReport& rep) {
  const auto names = rep.model_names();
  for (const auto& name : names) {
    std::vector<MetricRecord> mine;
    for (const auto& r : rep.records)
      if (r.model == name) mine.push_back(r);
    if (mine.size() >= 2) rep.aggregates[name] = aggregate(mine);
  }
  if (rep.config.k >= 3 && !rep.leaky) {
    std::map<std::string, std::vector<double>> kappa;
    for (const auto& name : names) kappa[name] = rep.kappas(name);
    Warnings w;
    rep.significance = pairwise_significance(kappa, rep.config.significance, &w);
    for (auto& msg : w.messages) rep.warnings.push_back(msg);
  }
}

}  // namespace detail

/// Loads the manifest named by the config.
inline DatasetManifest load_experiment_manifest(const ExperimentConfig& cfg, Warnings* warnings = nullptr) {
  if (cfg.manifest.empty()) throw Error(ErrorKind::kConfig, "experiment config has no manifest");
  auto m = load_manifest(cfg.manifest, warnings);
  if (m.size() == 0) throw Error(ErrorKind::kInput, "manifest " + cfg.manifest.string() + " has no images");
  return m;
}

inline ExperimentReport run_honest(const ExperimentConfig& cfg, const DatasetManifest& m) {
  detail::Stopwatch total;
  ExperimentReport rep;
  rep.config = cfg;
  rep.config_echo = cfg.describe();
  rep.config_digest = cfg.digest();
  for (const auto& c : m.classes) rep.class_names.push_back(c.name);
  rep.total_records = m.size();
  const std::size_t C = m.class_count();
  const auto cache_dir = detail::resolve_cache_dir(cfg);
  const unsigned threads = worker_count(cfg.threads);

  // (1) Stratified hold-out and folds on original images.
  Warnings split_w;
  auto plan = stratified_holdout(m, cfg.holdout_fraction, cfg.seed);
  plan = stratified_kfold(std::move(plan), m, cfg.k, cfg.seed, &split_w);
  for (auto& msg : split_w.messages) rep.warnings.push_back(msg);
  rep.test_size = plan.test_indices.size();
  rep.pool_size = plan.train_indices.size();
  for (int f = 0; f < cfg.k; ++f) rep.fold_sizes.push_back(plan.fold_members(f).size());
  rep.test_class_counts.assign(C, 0);
  for (auto i : plan.test_indices) ++rep.test_class_counts[static_cast<std::size_t>(m.records[i].label)];

  // Original-image features, extracted once.
  detail::Stopwatch sw;
  detail::FeatureStore store;
  store.originals = detail::original_features(m, cfg.features, cache_dir, threads);
  store.index.originals = m.size();
  rep.timings.emplace_back("extract.originals", sw.seconds());

  const auto X_test = detail::gather(store.originals, plan.test_indices);
  std::vector<int> y_test;
  for (auto i : plan.test_indices) y_test.push_back(m.records[i].label);
  rep.test_features_digest = detail::matrix_digest(X_test);

  // Augmented copies of the training pool. Draws are keyed by (seed, source,
  // copy), so a fold uses exactly the copies it would have produced itself.
  if (cfg.variant == Variant::kAugmented) {
    sw = {};
    detail::add_augmented(store, m, plan.train_indices, cfg, cache_dir, threads);
    rep.timings.emplace_back("augment+extract", sw.seconds());
  }

  // Whole-pool SMOTEENN: resample once, synthetic rows follow their parent's fold.
  std::optional<LabeledFeatures<float>> pool_resampled;
  std::vector<int> pool_row_fold;
  if (cfg.variant == Variant::kSmoteenn && cfg.smoteenn_mode == SmoteennMode::kWholePool) {
    sw = {};
    ResampleConfig rc = cfg.resample;
    rc.seed = stream_seed(cfg.seed, {0x706f6f6cULL});
    Warnings w;
    auto res = smoteenn(store.rows(plan.train_indices, m), rc, &w, threads);
    for (auto& msg : w.messages) rep.warnings.push_back("whole-pool smoteenn: " + msg);
    std::unordered_map<std::size_t, int> fold_of_id;
    for (std::size_t i = 0; i < plan.train_indices.size(); ++i) fold_of_id[plan.train_indices[i]] = plan.fold_of[i];
    for (const auto& p : res.data.provenance) pool_row_fold.push_back(fold_of_id.at(p.synthetic ? p.parent_id : p.id));
    rep.whole_pool_resampled = res.data.rows();
    pool_resampled = std::move(res.data);
    rep.timings.emplace_back("resample.whole_pool", sw.seconds());
  }

  // (2) + (3) Per fold: preprocess the training folds, train, score.
  const ProvenanceIndex& index = store.index;
  struct FoldOut {
    detail::ScoredFold scored;
    StageSizes stage;
    AuditResult audit;
  };
  std::vector<FoldOut> folds(static_cast<std::size_t>(cfg.k));
  parallel_for(folds.size(), threads, [&](std::size_t fi) {
    const int f = static_cast<int>(fi);
    detail::Stopwatch fw;
    FoldOut& out = folds[fi];
    const auto train_idx = plan.training_members(f);
    const auto val_idx = plan.fold_members(f);
    out.stage.fold = f;
    out.stage.originals = train_idx.size();

    LabeledFeatures<float> train;
    if (cfg.variant == Variant::kAugmented) {
      const std::unordered_set<std::size_t> in_train(train_idx.begin(), train_idx.end());
      std::vector<std::size_t> ids = train_idx;
      for (std::size_t j = 0; j < index.derived_source.size(); ++j) {
        if (in_train.count(index.derived_source[j])) ids.push_back(index.originals + j);
      }
      out.stage.augmented = ids.size() - train_idx.size();
      train = store.rows(ids, m);
    } else if (cfg.variant == Variant::kSmoteenn && pool_resampled) {
      std::vector<std::size_t> keep;
      for (std::size_t r = 0; r < pool_row_fold.size(); ++r)
        if (pool_row_fold[r] != f) keep.push_back(r);
      train.X = detail::gather(pool_resampled->X, keep);
      for (auto r : keep) {
        train.y.push_back(pool_resampled->y[r]);
        train.provenance.push_back(pool_resampled->provenance[r]);
      }
      out.stage.after_enn = train.rows();
    } else if (cfg.variant == Variant::kSmoteenn) {
      ResampleConfig rc = cfg.resample;
      rc.seed = detail::fold_seed(cfg.seed, 0x736d6f7465ULL, f);
      Warnings w;
      auto res = smoteenn(store.rows(train_idx, m), rc, &w, 1);
      for (auto& msg : w.messages) out.scored.warnings.push_back(fmt::format("fold {} smoteenn: {}", f, msg));
      out.stage.after_smote = 0;
      for (auto c : res.counts_after_smote) out.stage.after_smote += c;
      train = std::move(res.data);
      out.stage.after_enn = train.rows();
    } else {
      train = store.rows(train_idx, m);
    }
    out.stage.train_rows = train.rows();
    out.stage.class_counts = train.class_counts(C);
    const double prep = fw.seconds();

    out.audit = audit_training_rows(train, index, plan.test_indices, &X_test, fmt::format("fold {}", f));

    const auto X_val = detail::gather(store.originals, val_idx);
    std::vector<int> y_val;
    for (auto i : val_idx) y_val.push_back(m.records[i].label);
    out.scored = [&] {
      auto s = detail::train_and_score(cfg, train, X_test, y_test, &X_val, &y_val, C, f);
      s.warnings.insert(s.warnings.begin(), out.scored.warnings.begin(), out.scored.warnings.end());
      return s;
    }();
    out.scored.timings.insert(out.scored.timings.begin(), {fmt::format("fold{}.preprocess", f), prep});
  });

  for (auto& fo : folds) {
    rep.stages.push_back(fo.stage);
    rep.audit.merge(fo.audit);
    for (auto& r : fo.scored.test) rep.records.push_back(r);
    for (auto& r : fo.scored.validation) rep.validation_records.push_back(r);
    for (auto& w : fo.scored.warnings) rep.warnings.push_back(w);
    for (auto& t : fo.scored.timings) rep.timings.push_back(t);
  }
  if (!rep.audit.passed) {
    throw Error(ErrorKind::kLeakage, fmt::format("provenance audit failed: {}; first: {}", rep.audit.summary(),
                                                 rep.audit.violations.empty() ? "" : rep.audit.violations.front()));
  }
  detail::finish_report(rep);
  rep.timings.emplace_back("total", total.seconds());
  return rep;
}

/// Augment everything, then split train / validation / test.
inline ExperimentReport run_leaky(const ExperimentConfig& cfg, const DatasetManifest& m) {
  if (cfg.protocol != Protocol::kLeaky) throw Error(ErrorKind::kUsage, "run_leaky needs protocol=leaky");
  detail::Stopwatch total;
  ExperimentReport rep;
  rep.config = cfg;
  rep.config_echo = cfg.describe();
  rep.config_digest = cfg.digest();
  rep.leaky = true;
  for (const auto& c : m.classes) rep.class_names.push_back(c.name);
  rep.total_records = m.size();
  const std::size_t C = m.class_count();
  const auto cache_dir = detail::resolve_cache_dir(cfg);
  const unsigned threads = worker_count(cfg.threads);

  detail::Stopwatch sw;
  detail::FeatureStore store;
  store.originals = detail::original_features(m, cfg.features, cache_dir, threads);
  std::vector<std::size_t> all(m.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  detail::add_augmented(store, m, all, cfg, cache_dir, threads);
  rep.timings.emplace_back("augment+extract", sw.seconds());

  // Manifest over every row id: originals then derived copies.
  DatasetManifest rows_manifest;
  rows_manifest.classes = m.classes;
  rows_manifest.records = m.records;
  for (std::size_t j = 0; j < store.index.derived_source.size(); ++j) {
    ImageRecord r = m.records[store.index.derived_source[j]];
    r.checksum = fmt::format("{}:{}", r.checksum, j);  // distinct ordering key per copy
    r.source = store.index.derived_source[j];
    r.copy = static_cast<int>(j);
    rows_manifest.records.push_back(std::move(r));
  }
  const auto test_plan = stratified_holdout(rows_manifest, cfg.leaky_test_fraction, cfg.seed);
  std::vector<std::size_t> train_ids = test_plan.train_indices, val_ids;
  if (cfg.leaky_validation_fraction > 0.0) {
    const auto rest = rows_manifest.subset(test_plan.train_indices);
    const auto val_plan = stratified_holdout(rest, cfg.leaky_validation_fraction / (1.0 - cfg.leaky_test_fraction),
                                             stream_seed(cfg.seed, {0x76616cULL}));
    train_ids.clear();
    for (auto i : val_plan.train_indices) train_ids.push_back(test_plan.train_indices[i]);
    for (auto i : val_plan.test_indices) val_ids.push_back(test_plan.train_indices[i]);
  }
  rep.test_size = test_plan.test_indices.size();
  rep.pool_size = train_ids.size() + val_ids.size();
  rep.fold_sizes = {val_ids.size()};
  rep.test_class_counts.assign(C, 0);
  for (auto i : test_plan.test_indices) ++rep.test_class_counts[static_cast<std::size_t>(rows_manifest.records[i].label)];

  const auto train = store.rows(train_ids, m);
  const auto test = store.rows(test_plan.test_indices, m);
  const auto val = store.rows(val_ids, m);
  rep.test_features_digest = detail::matrix_digest(test.X);

  StageSizes st;
  st.originals = 0;
  for (auto id : train_ids) st.originals += id < m.size();
  st.augmented = train_ids.size() - st.originals;
  st.train_rows = train.rows();
  st.class_counts = train.class_counts(C);
  rep.stages.push_back(st);

  // Roots of the test rows; a training row sharing a root is leakage.
  std::vector<std::size_t> test_roots;
  for (auto id : test_plan.test_indices) test_roots.push_back(*store.index.root(id));
  std::sort(test_roots.begin(), test_roots.end());
  test_roots.erase(std::unique(test_roots.begin(), test_roots.end()), test_roots.end());
  rep.audit = audit_training_rows(train, store.index, test_roots, &test.X, "leaky split");

  auto scored = detail::train_and_score(cfg, train, test.X, test.y, &val.X, &val.y, C, 0);
  rep.records = scored.test;
  rep.validation_records = scored.validation;
  rep.warnings = scored.warnings;
  for (auto& t : scored.timings) rep.timings.push_back(t);
  rep.warnings.push_back("LEAKY protocol: test rows share source images with training rows; scores are inflated");
  detail::finish_report(rep);
  rep.timings.emplace_back("total", total.seconds());
  return rep;
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg, const DatasetManifest& m) {
  cfg.validate();
  return cfg.protocol == Protocol::kLeaky ? run_leaky(cfg, m) : run_honest(cfg, m);
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  Warnings w;
  const auto m = load_experiment_manifest(cfg, &w);
  auto rep = run_experiment(cfg, m);
  rep.warnings.insert(rep.warnings.begin(), w.messages.begin(), w.messages.end());
  return rep;
}

/// Leaky minus honest mean test score per model.
inline std::map<std::string, double> overestimation(const ExperimentReport& leaky, const ExperimentReport& honest,
                                                    const std::string& metric = "accuracy") {
  std::map<std::string, double> out;
  for (const auto& name : leaky.model_names()) out[name] = leaky.mean(name, metric) - honest.mean(name, metric);
  return out;
}

// ---------------------------------------------------------------------------
// Comparing variants.

/// Per-model fold kappas of one finished run.
struct RunSummary {
  std::string name;
  std::string variant;
  std::string protocol;
  std::string config_digest;
  std::map<std::string, std::vector<double>> kappa;  // model -> fold-ordered values
};

inline RunSummary summarize_run(const ExperimentReport& rep) {
  RunSummary s;
  s.name = rep.config.name;
  s.variant = to_string(rep.config.variant);
  s.protocol = to_string(rep.config.protocol);
  s.config_digest = rep.config_digest;
  for (const auto& m : rep.model_names()) s.kappa[m] = rep.kappas(m);
  return s;
}

struct VariantComparison {
  std::string model;
  std::string run_a, run_b;  // run names (variant in brackets)
  double median_a = 0.0, median_b = 0.0;
  TestResult result;
  std::string direction;  // ">", "<" or "="
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw Error(ErrorKind::kInput, "median of an empty vector");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Mann-Whitney on kappa vectors for every model and every pair of runs.
inline std::vector<VariantComparison> compare_variants(const std::vector<RunSummary>& runs,
                                                       const MannWhitneyOptions& opt = {}) {
  if (runs.size() < 2) throw Error(ErrorKind::kInput, "comparison needs at least two runs");
  const auto& first = runs.front();
  for (const auto& r : runs) {
    if (r.kappa.size() != first.kappa.size()) throw Error(ErrorKind::kInput, "runs differ in their model sets");
    for (const auto& [model, v] : first.kappa) {
      const auto it = r.kappa.find(model);
      if (it == r.kappa.end()) throw Error(ErrorKind::kInput, fmt::format("run '{}' lacks model '{}'", r.name, model));
      if (it->second.size() != v.size()) {
        throw Error(ErrorKind::kInput, fmt::format("run '{}' has {} folds for '{}', expected {}", r.name,
                                                   it->second.size(), model, v.size()));
      }
    }
  }
  std::vector<VariantComparison> out;
  for (const auto& [model, unused] : first.kappa) {
    for (std::size_t i = 0; i < runs.size(); ++i)
      for (std::size_t j = i + 1; j < runs.size(); ++j) {
        VariantComparison c;
        c.model = model;
        c.run_a = fmt::format("{} [{}]", runs[i].name, runs[i].variant);
        c.run_b = fmt::format("{} [{}]", runs[j].name, runs[j].variant);
        const auto& a = runs[i].kappa.at(model);
        const auto& b = runs[j].kappa.at(model);
        c.median_a = median(a);
        c.median_b = median(b);
        c.result = mann_whitney_u(a, b, opt);
        c.direction = c.median_a > c.median_b ? ">" : (c.median_a < c.median_b ? "<" : "=");
        out.push_back(std::move(c));
      }
  }
  return out;
}

}  // namespace poxbench
