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

// Report artifacts. A run directory holds
//
//   report.txt         human-readable tables (mean ± SD, mean ± SE)
//   metrics.csv        one row per (split, model, fold)
//   kappa_<model>.csv  fold-ordered test kappas
//   significance.csv   normality and pairwise Mann-Whitney results
//   boxplot.csv        five-number summaries plus the raw vectors
//   boxplot.svg        static boxplot of the same data
//   audit.txt          provenance audit
//   warnings.txt       collected warnings
//   timings.log        wall-clock seconds per stage (the only non-reproducible file)
//
// Every file except timings.log starts with the config digest.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "poxbench/experiment.hpp"

namespace poxbench {

// ---------------------------------------------------------------------------
// Boxplot data.

/// Quantile with linear interpolation between order statistics (type 7).
inline double quantile_type7(std::vector<double> v, double p) {
  if (v.empty()) throw Error(ErrorKind::kInput, "quantile of an empty vector");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

struct BoxSummary {
  std::string model;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  double whisker_low = 0, whisker_high = 0;  // most extreme values within 1.5 IQR of the box
  std::vector<double> outliers;
  std::vector<double> values;
};

inline BoxSummary box_summary(const std::string& model, const std::vector<double>& values) {
  if (values.empty()) throw Error(ErrorKind::kInput, "boxplot of an empty vector for '" + model + "'");
  BoxSummary b;
  b.model = model;
  b.values = values;
  b.min = *std::min_element(values.begin(), values.end());
  b.max = *std::max_element(values.begin(), values.end());
  b.q1 = quantile_type7(values, 0.25);
  b.median = quantile_type7(values, 0.5);
  b.q3 = quantile_type7(values, 0.75);
  const double iqr = b.q3 - b.q1;
  const double lo = b.q1 - 1.5 * iqr, hi = b.q3 + 1.5 * iqr;
  b.whisker_low = b.max;
  b.whisker_high = b.min;
  for (double v : values) {
    if (v < lo || v > hi) {
      b.outliers.push_back(v);
    } else {
      b.whisker_low = std::min(b.whisker_low, v);
      b.whisker_high = std::max(b.whisker_high, v);
    }
  }
  std::sort(b.outliers.begin(), b.outliers.end());
  return b;
}

inline std::string boxplot_csv(const std::vector<BoxSummary>& boxes, const std::string& digest) {
  if (boxes.empty()) throw Error(ErrorKind::kInput, "boxplot needs at least one model");
  std::string out = fmt::format("# config_digest={}\n", digest);
  out += "# quartiles: linear interpolation between order statistics (type 7); whiskers: Tukey 1.5 IQR\n";
  out += "kind,model,min,q1,median,q3,max,whisker_low,whisker_high,outliers\n";
  for (const auto& b : boxes) {
    out += fmt::format("summary,{},{},{},{},{},{},{},{},{}\n", b.model, b.min, b.q1, b.median, b.q3, b.max,
                       b.whisker_low, b.whisker_high, fmt::join(b.outliers, ";"));
  }
  out += "kind,model,values\n";
  for (const auto& b : boxes) out += fmt::format("values,{},{}\n", b.model, fmt::join(b.values, ";"));
  return out;
}

inline std::string boxplot_svg(const std::vector<BoxSummary>& boxes, const std::string& title) {
  const double width = 120.0 * static_cast<double>(boxes.size()) + 80.0, height = 320.0;
  const double top = 40.0, bottom = height - 40.0;
  double lo = 1.0, hi = 0.0;
  for (const auto& b : boxes) {
    lo = std::min(lo, b.min);
    hi = std::max(hi, b.max);
  }
  if (hi - lo < 1e-9) {
    lo -= 0.05;
    hi += 0.05;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto y = [&](double v) { return bottom - (v - lo) / (hi - lo) * (bottom - top); };
  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" font-family=\"sans-serif\" "
      "font-size=\"12\">\n",
      width, height);
  s += fmt::format("<text x=\"{:.1f}\" y=\"20\" text-anchor=\"middle\">{}</text>\n", width / 2, title);
  s += fmt::format("<line x1=\"50\" y1=\"{:.1f}\" x2=\"50\" y2=\"{:.1f}\" stroke=\"black\"/>\n", top, bottom);
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    s += fmt::format("<text x=\"45\" y=\"{:.1f}\" text-anchor=\"end\">{:.3f}</text>\n", y(v) + 4, v);
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto& b = boxes[i];
    const double cx = 110.0 + 120.0 * static_cast<double>(i);
    s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"black\"/>\n", cx,
                     y(b.whisker_low), y(b.whisker_high));
    s += fmt::format(
        "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"60\" height=\"{:.1f}\" fill=\"#cfe0f3\" stroke=\"black\"/>\n",
        cx - 30, y(b.q3), std::max(0.5, y(b.q1) - y(b.q3)));
    s += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"black\" "
                     "stroke-width=\"2\"/>\n",
                     cx - 30, y(b.median), cx + 30, y(b.median));
    for (double o : b.outliers) {
      s += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"3\" fill=\"none\" stroke=\"black\"/>\n", cx, y(o));
    }
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", cx, bottom + 20, b.model);
  }
  s += "</svg>\n";
  return s;
}

inline std::vector<BoxSummary> kappa_boxes(const ExperimentReport& rep) {
  std::vector<BoxSummary> out;
  for (const auto& m : rep.model_names()) out.push_back(box_summary(m, rep.kappas(m)));
  return out;
}

// ---------------------------------------------------------------------------
// Text report.

namespace detail {

inline std::string metric_table(const ExperimentReport& rep, bool use_se) {
  std::string out = fmt::format("{:<14}{:>20}{:>20}{:>20}{:>20}{:>20}\n", "Model", "Accuracy", "Precision", "Recall",
                                "F1-Score", "Kappa");
  for (const auto& model : rep.model_names()) {
    out += fmt::format("{:<14}", model);
    const auto it = rep.aggregates.find(model);
    for (std::size_t i = 0; i < kMetricNames.size(); ++i) {
      if (it != rep.aggregates.end()) {
        const auto& s = it->second[i];
        out += fmt::format("{:>20}", format_percent(s.mean, use_se ? s.se : s.sd));
      } else {
        out += fmt::format("{:>20}", fmt::format("{:.2f}%", 100.0 * rep.mean(model, kMetricNames[i])));
      }
    }
    out += "\n";
  }
  return out;
}

inline std::string validation_table(const ExperimentReport& rep) {
  std::string out;
  for (const auto& model : rep.model_names()) {
    std::vector<MetricRecord> mine;
    for (const auto& r : rep.validation_records)
      if (r.model == model) mine.push_back(r);
    if (mine.empty()) continue;
    out += fmt::format("{:<14}", model);
    for (const auto& name : kMetricNames) {
      double s = 0.0;
      for (const auto& r : mine) s += metric_value(r, name);
      out += fmt::format("{:>20}", fmt::format("{:.2f}%", 100.0 * s / static_cast<double>(mine.size())));
    }
    out += "\n";
  }
  return out;
}

}  // namespace detail

inline std::string render_report(const ExperimentReport& rep, const ExperimentReport* paired_honest = nullptr) {
  std::string out;
  out += fmt::format("# config_digest={}\n", rep.config_digest);
  out += fmt::format("poxbench experiment report: {}\n", rep.config.name);
  if (rep.leaky) {
    out += "*** LEAKY PROTOCOL: the corpus was augmented before splitting; test rows share source images with "
           "training rows. Scores are inflated and must not be reported as generalisation estimates. ***\n";
  }
  out += "\n[config]\n" + rep.config_echo;

  out += "\n[split]\n";
  out += fmt::format("records={} test={} training_pool={}\n", rep.total_records, rep.test_size, rep.pool_size);
  out += "test per class:";
  for (std::size_t c = 0; c < rep.class_names.size() && c < rep.test_class_counts.size(); ++c) {
    out += fmt::format(" {}={}", rep.class_names[c], rep.test_class_counts[c]);
  }
  out += "\n";
  out += fmt::format("{} sizes: {}\n", rep.leaky ? "validation" : "validation fold", fmt::join(rep.fold_sizes, ","));
  if (rep.whole_pool_resampled > 0) {
    out += fmt::format("whole-pool smoteenn: training pool resampled to {} rows\n", rep.whole_pool_resampled);
  }
  out += fmt::format("test features sha256={}\n", rep.test_features_digest);

  out += "\n[stage sizes]\n";
  out += fmt::format("{:>5}{:>11}{:>11}{:>13}{:>11}{:>12}  per-class\n", "fold", "originals", "augmented", "after_smote",
                     "after_enn", "train_rows");
  for (const auto& s : rep.stages) {
    out += fmt::format("{:>5}{:>11}{:>11}{:>13}{:>11}{:>12}  {}\n", s.fold, s.originals, s.augmented, s.after_smote,
                       s.after_enn, s.train_rows, fmt::join(s.class_counts, ","));
  }

  const bool folds = !rep.aggregates.empty();
  if (folds) {
    out += fmt::format("\n[fixed test set, mean ± SD over {} folds]\n", rep.config.k);
    out += detail::metric_table(rep, false);
    out += fmt::format("\n[fixed test set, mean ± SE over {} folds]\n", rep.config.k);
    out += detail::metric_table(rep, true);
  } else {
    out += "\n[test set, single split]\n";
    out += detail::metric_table(rep, false);
  }
  if (!rep.validation_records.empty()) {
    out += "\n[validation rows, mean; not part of the headline tables]\n";
    out += detail::validation_table(rep);
  }

  if (rep.significance) {
    const auto& sig = *rep.significance;
    out += "\n[normality of fold kappas, Shapiro-Wilk]\n";
    for (std::size_t i = 0; i < sig.models.size(); ++i) {
      if (sig.normality[i]) {
        const auto& r = *sig.normality[i];
        out += fmt::format("{:<14} W={:.4f} p={:.4f} {}\n", sig.models[i], r.statistic, r.p_value,
                           r.reject ? "non-normal" : "normal");
      } else {
        out += fmt::format("{:<14} skipped (constant vector)\n", sig.models[i]);
      }
    }
    out += fmt::format("\n[pairwise Mann-Whitney U on fold kappas, two-sided, alpha={}{}; exact when n<={} without "
                       "ties]\n",
                       rep.config.significance.mann_whitney.alpha, sig.holm ? ", Holm-adjusted" : "",
                       sig.exact_max_total);
    for (const auto& pt : sig.pairs) {
      out += fmt::format("{:<10} vs {:<10} U={:<6g} p={:.4f} [{}] {}\n", pt.first, pt.second, pt.result.statistic,
                         pt.result.p_value, pt.result.method, pt.result.reject ? "significant" : "not significant");
    }
  }

  if (paired_honest != nullptr) {
    out += "\n[overestimation: leaky minus honest mean test accuracy]\n";
    for (const auto& [model, d] : overestimation(rep, *paired_honest)) {
      out += fmt::format("{:<14} {:+.2f} points (leaky {:.2f}%, honest {:.2f}%)\n", model, 100.0 * d,
                         100.0 * rep.mean(model, "accuracy"), 100.0 * paired_honest->mean(model, "accuracy"));
    }
  }

  out += "\n[provenance audit]\n" + rep.audit.summary() + "\n";
  out += fmt::format("\n[warnings] {} (see warnings.txt)\n", rep.warnings.size());
  return out;
}

inline std::string render_metrics_csv(const ExperimentReport& rep) {
  std::string out = fmt::format("# config_digest={} name={} protocol={} variant={}\n", rep.config_digest,
                                rep.config.name, to_string(rep.config.protocol), to_string(rep.config.variant));
  out += "split,variant,model,fold,accuracy,precision_macro,recall_macro,f1_macro,kappa\n";
  auto row = [&](const char* split, const MetricRecord& r) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", split, r.variant, r.model, r.fold, r.accuracy,
                       r.precision_macro, r.recall_macro, r.f1_macro, r.kappa);
  };
  for (const auto& r : rep.records) row("test", r);
  for (const auto& r : rep.validation_records) row("validation", r);
  return out;
}

inline std::string render_significance_csv(const ExperimentReport& rep) {
  std::string out = fmt::format("# config_digest={}\n", rep.config_digest);
  out += "test,model_a,model_b,method,statistic,p_value,p_raw,reject\n";
  if (!rep.significance) return out;
  const auto& sig = *rep.significance;
  for (std::size_t i = 0; i < sig.models.size(); ++i) {
    if (!sig.normality[i]) continue;
    const auto& r = *sig.normality[i];
    out += fmt::format("normality,{},,{},{},{},{},{}\n", sig.models[i], r.method, r.statistic, r.p_value, r.p_raw,
                       r.reject ? 1 : 0);
  }
  for (const auto& pt : sig.pairs) {
    const auto& r = pt.result;
    out += fmt::format("pairwise,{},{},{},{},{},{},{}\n", pt.first, pt.second, r.method, r.statistic, r.p_value,
                       r.p_raw, r.reject ? 1 : 0);
  }
  return out;
}

inline std::string render_audit(const ExperimentReport& rep) {
  std::string out = fmt::format("# config_digest={}\n", rep.config_digest);
  out += fmt::format("protocol={}\n", to_string(rep.config.protocol));
  out += rep.audit.summary() + "\n";
  if (rep.leaky) out += "LEAKY: failure is the expected outcome of this protocol\n";
  for (const auto& v : rep.audit.violations) out += v + "\n";
  if (rep.audit.violation_count > rep.audit.violations.size()) {
    out += fmt::format("... {} more\n", rep.audit.violation_count - rep.audit.violations.size());
  }
  return out;
}

/// Writes the run directory and returns its path.
inline std::filesystem::path write_report(const ExperimentReport& rep, const std::filesystem::path& dir,
                                          const ExperimentReport* paired_honest = nullptr) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_file_atomic(dir / "report.txt", render_report(rep, paired_honest));
  write_file_atomic(dir / "metrics.csv", render_metrics_csv(rep));
  for (const auto& model : rep.model_names()) {
    std::string k = fmt::format("# config_digest={}\nfold,kappa\n", rep.config_digest);
    for (const auto& r : rep.records)
      if (r.model == model) k += fmt::format("{},{}\n", r.fold, r.kappa);
    write_file_atomic(dir / fmt::format("kappa_{}.csv", model), k);
  }
  write_file_atomic(dir / "significance.csv", render_significance_csv(rep));
  const auto boxes = kappa_boxes(rep);
  write_file_atomic(dir / "boxplot.csv", boxplot_csv(boxes, rep.config_digest));
  write_file_atomic(dir / "boxplot.svg",
                    boxplot_svg(boxes, fmt::format("Cohen's kappa per fold: {} ({})", rep.config.name,
                                                   to_string(rep.config.variant))));
  write_file_atomic(dir / "audit.txt", render_audit(rep));
  std::string w = fmt::format("# config_digest={}\n", rep.config_digest);
  for (const auto& msg : rep.warnings) w += msg + "\n";
  write_file_atomic(dir / "warnings.txt", w);
  std::string t;
  for (const auto& [stage, secs] : rep.timings) t += fmt::format("{}\t{:.6f}\n", stage, secs);
  write_file_atomic(dir / "timings.log", t);
  return dir;
}

/// Reads the test-set kappas of a run directory written by write_report.
inline RunSummary read_run(const std::filesystem::path& dir) {
  const auto path = std::filesystem::is_directory(dir) ? dir / "metrics.csv" : dir;
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kInput, "cannot read " + path.string());
  RunSummary s;
  std::string line;
  std::getline(in, line);
  auto field = [&](const std::string& key) {
    const auto at = line.find(key + "=");
    if (at == std::string::npos) throw Error(ErrorKind::kInput, path.string() + ": header lacks " + key);
    const auto start = at + key.size() + 1;
    return line.substr(start, line.find(' ', start) - start);
  };
  if (line.rfind("# config_digest=", 0) != 0) throw Error(ErrorKind::kInput, path.string() + " is not a metrics file");
  s.config_digest = field("config_digest");
  s.name = field("name");
  s.protocol = field("protocol");
  s.variant = field("variant");
  std::getline(in, line);  // column header
  std::map<std::string, std::map<int, double>> by_fold;
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
    if (cols.size() != 9) throw Error(ErrorKind::kInput, fmt::format("{}:{}: expected 9 columns", path.string(), lineno));
    if (cols[0] != "test") continue;
    try {
      by_fold[cols[2]][std::stoi(cols[3])] = std::stod(cols[8]);
    } catch (const std::exception&) {
      throw Error(ErrorKind::kInput, fmt::format("{}:{}: malformed number", path.string(), lineno));
    }
  }
  for (auto& [model, folds] : by_fold) {
    auto& v = s.kappa[model];
    for (auto& [f, k] : folds) v.push_back(k);
  }
  if (s.kappa.empty()) throw Error(ErrorKind::kInput, path.string() + " has no test rows");
  return s;
}

inline std::string render_comparison(const std::vector<VariantComparison>& rows) {
  std::string out = "model,run_a,run_b,median_kappa_a,median_kappa_b,direction,method,U,p_value,significant\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{:.4f},{:.4f},{},{},{:g},{:.4f},{}\n", r.model, r.run_a, r.run_b, r.median_a,
                       r.median_b, r.direction, r.result.method, r.result.statistic, r.result.p_value,
                       r.result.reject ? "yes" : "no");
  }
  return out;
}

}  // namespace poxbench
