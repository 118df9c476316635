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

// INI experiment configs. Sections and keys:
//
//   [experiment] name manifest variant protocol models k holdout_fraction seed
//                smoteenn_mode cache_dir threads leaky_test_fraction
//                leaky_validation_fraction
//   [features]   source (stub|backbone|cache) dim grid gain jitter seed
//                model_path output_dim input_width input_height cache_file
//   [augment]    copies hflip_prob blur_prob blur_kernel blur_sigma allow_vflip vflip_prob
//   [resample]   k_smote k_enn
//   [logreg]     C max_iter tol
//   [mlp]        hidden alpha learning_rate power_t max_epochs batch_size tol n_iter_no_change
//   [svm]        C gamma coef0 degree tol max_iter
//   [stats]      exact_max_total holm
//
// Unknown sections or keys are rejected. Relative paths resolve against the
// config file's directory.

#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "poxbench/experiment.hpp"

namespace poxbench {

namespace detail {

inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema = {
      {"experiment",
       {"name", "manifest", "variant", "protocol", "models", "k", "holdout_fraction", "seed", "smoteenn_mode",
        "cache_dir", "threads", "leaky_test_fraction", "leaky_validation_fraction"}},
      {"features",
       {"source", "dim", "grid", "gain", "jitter", "seed", "model_path", "output_dim", "input_width", "input_height",
        "cache_file"}},
      {"augment", {"copies", "hflip_prob", "blur_prob", "blur_kernel", "blur_sigma", "allow_vflip", "vflip_prob"}},
      {"resample", {"k_smote", "k_enn"}},
      {"logreg", {"C", "max_iter", "tol"}},
      {"mlp", {"hidden", "alpha", "learning_rate", "power_t", "max_epochs", "batch_size", "tol", "n_iter_no_change"}},
      {"svm", {"C", "gamma", "coef0", "degree", "tol", "max_iter"}},
      {"stats", {"exact_max_total", "holm"}},
  };
  return schema;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class IniView {
 public:
  explicit IniView(const boost::property_tree::ptree& tree) : tree_(tree) {}

  template <typename T>
  void get(const std::string& path, T& out) const {
    const auto v = tree_.get_optional<std::string>(path);
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        const std::string s = trim(*v);
        if (s == "true" || s == "1" || s == "on" || s == "yes") {
          out = true;
        } else if (s == "false" || s == "0" || s == "off" || s == "no") {
          out = false;
        } else {
          throw std::invalid_argument(s);
        }
      } else if constexpr (std::is_same_v<T, std::string>) {
        out = trim(*v);
      } else {
        out = tree_.get<T>(path);
      }
    } catch (const std::exception&) {
      throw Error(ErrorKind::kConfig, fmt::format("config key {} has invalid value '{}'", path, *v));
    }
  }

  std::optional<std::string> str(const std::string& path) const {
    auto v = tree_.get_optional<std::string>(path);
    if (v) return trim(*v);
    return std::nullopt;
  }

 private:
  const boost::property_tree::ptree& tree_;
};

}  // namespace detail

/// Applies the INI text on top of `cfg`. `base` resolves relative paths.
inline ExperimentConfig apply_config_ini(ExperimentConfig cfg, const std::string& text,
                                         const std::filesystem::path& base = {}) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::kConfig, fmt::format("config line {}: {}", e.line(), e.message()));
  }
  const auto& schema = detail::config_schema();
  for (const auto& [section, keys] : tree) {
    const auto it = schema.find(section);
    if (it == schema.end()) throw Error(ErrorKind::kConfig, "unknown config section [" + section + "]");
    if (keys.empty() && !keys.data().empty()) {
      throw Error(ErrorKind::kConfig, "config key '" + section + "' outside a section");
    }
    for (const auto& [key, unused] : keys) {
      if (!it->second.count(key)) throw Error(ErrorKind::kConfig, "unknown config key " + section + "." + key);
    }
  }
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
  };

  const detail::IniView ini(tree);
  ini.get("experiment.name", cfg.name);
  if (auto v = ini.str("experiment.manifest")) cfg.manifest = resolve(*v);
  if (auto v = ini.str("experiment.variant")) cfg.variant = parse_variant(*v);
  if (auto v = ini.str("experiment.protocol")) cfg.protocol = parse_protocol(*v);
  if (auto v = ini.str("experiment.models")) {
    cfg.models.clear();
    for (const auto& m : detail::split_list(*v)) cfg.models.push_back(parse_model_kind(m));
  }
  ini.get("experiment.k", cfg.k);
  ini.get("experiment.holdout_fraction", cfg.holdout_fraction);
  ini.get("experiment.seed", cfg.seed);
  if (auto v = ini.str("experiment.smoteenn_mode")) cfg.smoteenn_mode = parse_smoteenn_mode(*v);
  if (auto v = ini.str("experiment.cache_dir")) cfg.cache_dir = resolve(*v);
  ini.get("experiment.threads", cfg.threads);
  ini.get("experiment.leaky_test_fraction", cfg.leaky_test_fraction);
  ini.get("experiment.leaky_validation_fraction", cfg.leaky_validation_fraction);

  if (auto v = ini.str("features.source")) {
    if (*v == "stub") {
      cfg.features.source = FeatureSource::kStub;
    } else if (*v == "backbone") {
      cfg.features.source = FeatureSource::kBackbone;
    } else if (*v == "cache") {
      cfg.features.source = FeatureSource::kCache;
    } else {
      throw Error(ErrorKind::kConfig, "unknown feature source '" + *v + "' (stub|backbone|cache)");
    }
  }
  ini.get("features.dim", cfg.features.stub.dim);
  ini.get("features.grid", cfg.features.stub.grid);
  ini.get("features.gain", cfg.features.stub.gain);
  ini.get("features.jitter", cfg.features.stub.jitter);
  ini.get("features.seed", cfg.features.stub.seed);
  if (auto v = ini.str("features.model_path")) cfg.features.backbone.model_path = resolve(*v);
  ini.get("features.output_dim", cfg.features.backbone.output_dim);
  ini.get("features.input_width", cfg.features.backbone.input_width);
  ini.get("features.input_height", cfg.features.backbone.input_height);
  if (auto v = ini.str("features.cache_file")) cfg.features.cache_file = resolve(*v);

  ini.get("augment.copies", cfg.augment.copies_per_image);
  ini.get("augment.hflip_prob", cfg.augment.hflip_prob);
  ini.get("augment.blur_prob", cfg.augment.blur_prob);
  if (ini.str("augment.blur_kernel")) {
    ini.get("augment.blur_kernel", cfg.augment.blur_kernel);
    cfg.augment.blur_sigma = default_blur_sigma(cfg.augment.blur_kernel);
  }
  ini.get("augment.blur_sigma", cfg.augment.blur_sigma);
  ini.get("augment.allow_vflip", cfg.augment.allow_vflip);
  ini.get("augment.vflip_prob", cfg.augment.vflip_prob);

  ini.get("resample.k_smote", cfg.resample.k_smote);
  ini.get("resample.k_enn", cfg.resample.k_enn);

  ini.get("logreg.C", cfg.model_configs.logreg.inv_reg_strength);
  ini.get("logreg.max_iter", cfg.model_configs.logreg.max_iter);
  ini.get("logreg.tol", cfg.model_configs.logreg.tol);

  if (auto v = ini.str("mlp.hidden")) {
    cfg.model_configs.mlp.hidden.clear();
    for (const auto& h : detail::split_list(*v)) {
      try {
        cfg.model_configs.mlp.hidden.push_back(std::stoi(h));
      } catch (const std::exception&) {
        throw Error(ErrorKind::kConfig, "mlp.hidden must be a comma-separated list of integers");
      }
    }
  }
  ini.get("mlp.alpha", cfg.model_configs.mlp.l2_alpha);
  ini.get("mlp.learning_rate", cfg.model_configs.mlp.learning_rate);
  ini.get("mlp.power_t", cfg.model_configs.mlp.power_t);
  ini.get("mlp.max_epochs", cfg.model_configs.mlp.max_epochs);
  ini.get("mlp.batch_size", cfg.model_configs.mlp.batch_size);
  ini.get("mlp.tol", cfg.model_configs.mlp.tol);
  ini.get("mlp.n_iter_no_change", cfg.model_configs.mlp.n_iter_no_change);

  ini.get("svm.C", cfg.model_configs.svm.C);
  ini.get("svm.gamma", cfg.model_configs.svm.gamma);
  ini.get("svm.coef0", cfg.model_configs.svm.coef0);
  ini.get("svm.degree", cfg.model_configs.svm.degree);
  ini.get("svm.tol", cfg.model_configs.svm.tol);
  ini.get("svm.max_iter", cfg.model_configs.svm.max_iter);

  ini.get("stats.exact_max_total", cfg.significance.mann_whitney.exact_max_total);
  ini.get("stats.holm", cfg.significance.holm);
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path, ExperimentConfig base = {}) {
  std::string text;
  try {
    text = read_file_bytes(path);
  } catch (const Error&) {
    throw Error(ErrorKind::kConfig, "cannot read config " + path.string());
  }
  return apply_config_ini(std::move(base), text, path.parent_path());
}

}  // namespace poxbench
