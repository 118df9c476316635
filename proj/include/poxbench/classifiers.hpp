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

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "poxbench/core.hpp"
#include "poxbench/logreg.hpp"
#include "poxbench/mlp.hpp"
#include "poxbench/svm.hpp"

namespace poxbench {

enum class ModelKind { kLogReg, kMlp, kSvm };

inline const std::vector<ModelKind> kAllModels = {ModelKind::kLogReg, ModelKind::kMlp, ModelKind::kSvm};

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kLogReg: return "logreg";
    case ModelKind::kMlp: return "mlp";
    case ModelKind::kSvm: return "svm";
  }
  return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "logreg" || s == "lr") return ModelKind::kLogReg;
  if (s == "mlp") return ModelKind::kMlp;
  if (s == "svm") return ModelKind::kSvm;
  throw Error(ErrorKind::kConfig, "unknown model '" + s + "' (logreg, mlp, svm)");
}

/// Per-kind hyperparameters; one bundle configures all three models.
struct ModelConfigs {
  LogRegConfig logreg;
  MlpConfig mlp;
  SvmConfig svm;

  void set_seed(std::uint64_t seed) {
    logreg.seed = seed;
    mlp.seed = seed;
    svm.seed = seed;
  }
};

using TrainedModel = std::variant<LinearModel, MlpModel, SvmModel>;

inline ModelKind kind_of(const TrainedModel& m) { return static_cast<ModelKind>(m.index()); }

template <typename Scalar>
TrainedModel train_model(ModelKind kind, const SampleMatrix<Scalar>& X, const std::vector<int>& y,
                         const ModelConfigs& cfg, Warnings* warnings = nullptr) {
  switch (kind) {
    case ModelKind::kLogReg: {
      auto m = train_logreg(X, y, cfg.logreg);
      if (!m.converged) {
        warn(warnings, fmt::format("logreg reached max_iter={} before tol={}", cfg.logreg.max_iter, cfg.logreg.tol));
      }
      return m;
    }
    case ModelKind::kMlp: return train_mlp(X, y, cfg.mlp);
    case ModelKind::kSvm: return train_svm(X, y, cfg.svm, warnings);
  }
  throw Error(ErrorKind::kConfig, "unknown model kind");
}

template <typename Scalar>
std::vector<int> predict(const TrainedModel& model, const SampleMatrix<Scalar>& X) {
  return std::visit([&](const auto& m) { return m.predict(X); }, model);
}

inline const std::vector<int>& model_classes(const TrainedModel& model) {
  return std::visit([](const auto& m) -> const std::vector<int>& { return m.classes; }, model);
}

/// Shapes, sparsity and training diagnostics in a few lines.
inline std::string describe(const TrainedModel& model) {
  struct Visitor {
    std::string operator()(const LinearModel& m) const {
      const auto total = static_cast<std::size_t>(m.W.size());
      return fmt::format("{}\nW: {}x{}  b: {}\nzero weights: {} / {} ({:.2f}%)\nepochs: {}  converged: {}\n"
                         "objective: {:.6g} -> {:.6g}",
                         m.config.describe(), m.W.rows(), m.W.cols(), m.b.size(), m.zero_weights(), total,
                         total ? 100.0 * static_cast<double>(m.zero_weights()) / static_cast<double>(total) : 0.0,
                         m.epochs, m.converged, m.objective_history.front(), m.objective_history.back());
    }
    std::string operator()(const MlpModel& m) const {
      std::string shapes;
      for (std::size_t l = 0; l < m.num_layers(); ++l) {
        shapes += fmt::format("{}W{}: {}x{}  b{}: {}", l ? "\n" : "", l + 1, m.layers[l], m.layers[l + 1], l + 1,
                              m.layers[l + 1]);
      }
      return fmt::format("{}\n{}\nparameters: {}\nepochs: {}\nloss: {:.6g} -> {:.6g}", m.config.describe(), shapes,
                         m.params.size(), m.epochs, m.initial_loss,
                         m.loss_curve.empty() ? m.initial_loss : m.loss_curve.back());
    }
    std::string operator()(const SvmModel& m) const {
      std::size_t at_bound = 0, total = 0;
      for (const auto& p : m.pairs) {
        for (double c : p.coef) {
          ++total;
          at_bound += std::abs(c) >= m.config.C;
        }
      }
      return fmt::format("{}\nresolved gamma: {:.6g}\nclass pairs: {}\nsupport vectors: {} x {} ({} pair entries, {} at C)",
                         m.config.describe(), m.gamma, m.pairs.size(), m.support_vectors.rows(),
                         m.support_vectors.cols(), total, at_bound);
    }
  };
  const auto& cls = model_classes(model);
  return fmt::format("model: {}\nclasses: {}\n{}", to_string(kind_of(model)), fmt::join(cls, ","),
                     std::visit(Visitor{}, model));
}

// ---------------------------------------------------------------------------
// Serialization. "PXMODEL\0", u32 version, u32 kind, config echo string, then
// kind-specific parameter blocks (little-endian, f64 values).

namespace detail {

constexpr char kModelMagic[8] = {'P', 'X', 'M', 'O', 'D', 'E', 'L', '\0'};
constexpr std::uint32_t kModelVersion = 1;

inline void put_matrix(std::string& out, const MatrixD& m) {
  put_u64(out, static_cast<std::uint64_t>(m.rows()));
  put_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) put_f64(out, m.data()[i]);
}
inline MatrixD get_matrix(ByteReader& r) {
  const auto rows = r.u64(), cols = r.u64();
  r.need(8 * rows * cols);
  MatrixD m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
  return m;
}
inline void put_vector(std::string& out, const Eigen::VectorXd& v) {
  put_u64(out, static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(out, v(i));
}
inline Eigen::VectorXd get_vector(ByteReader& r) {
  const auto n = r.u64();
  r.need(8 * n);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = r.f64();
  return v;
}
inline void put_ints(std::string& out, const std::vector<int>& v) {
  put_u64(out, v.size());
  for (int x : v) put_u32(out, static_cast<std::uint32_t>(x));
}
inline std::vector<int> get_ints(ByteReader& r) {
  const auto n = r.u64();
  r.need(4 * n);
  std::vector<int> v(n);
  for (auto& x : v) x = static_cast<int>(r.u32());
  return v;
}
inline void put_doubles(std::string& out, const std::vector<double>& v) {
  put_u64(out, v.size());
  for (double x : v) put_f64(out, x);
}
inline std::vector<double> get_doubles(ByteReader& r) {
  const auto n = r.u64();
  r.need(8 * n);
  std::vector<double> v(n);
  for (auto& x : v) x = r.f64();
  return v;
}

}  // namespace detail

inline std::string serialize_model(const TrainedModel& model) {
  using namespace detail;
  std::string out(kModelMagic, sizeof(kModelMagic));
  put_u32(out, kModelVersion);
  put_u32(out, static_cast<std::uint32_t>(model.index()));
  put_ints(out, model_classes(model));
  if (const auto* m = std::get_if<LinearModel>(&model)) {
    put_str(out, m->config.describe());
    put_f64(out, m->config.inv_reg_strength);
    put_u32(out, static_cast<std::uint32_t>(m->config.max_iter));
    put_f64(out, m->config.tol);
    put_u64(out, m->config.seed);
    put_matrix(out, m->W);
    put_vector(out, m->b);
    put_u32(out, static_cast<std::uint32_t>(m->epochs));
    put_u32(out, m->converged ? 1 : 0);
    put_doubles(out, m->objective_history);
  } else if (const auto* m = std::get_if<MlpModel>(&model)) {
    const auto& c = m->config;
    put_str(out, c.describe());
    put_ints(out, c.hidden);
    for (double v : {c.l2_alpha, c.learning_rate, c.power_t, c.beta1, c.beta2, c.epsilon, c.tol}) put_f64(out, v);
    for (int v : {c.max_epochs, c.batch_size, c.n_iter_no_change}) put_u32(out, static_cast<std::uint32_t>(v));
    put_u64(out, c.seed);
    put_ints(out, m->layers);
    put_vector(out, m->params);
    put_u32(out, static_cast<std::uint32_t>(m->epochs));
    put_f64(out, m->initial_loss);
    put_doubles(out, m->loss_curve);
  } else {
    const auto& s = std::get<SvmModel>(model);
    const auto& c = s.config;
    put_str(out, c.describe());
    for (double v : {c.C, c.gamma, c.coef0, c.tol}) put_f64(out, v);
    put_u32(out, static_cast<std::uint32_t>(c.degree));
    put_u64(out, static_cast<std::uint64_t>(c.max_iter));
    put_u64(out, c.seed);
    put_f64(out, s.gamma);
    put_matrix(out, s.support_vectors);
    put_u64(out, s.pairs.size());
    for (const auto& p : s.pairs) {
      put_u32(out, static_cast<std::uint32_t>(p.first));
      put_u32(out, static_cast<std::uint32_t>(p.second));
      put_u64(out, p.support.size());
      for (auto i : p.support) put_u64(out, i);
      put_doubles(out, p.coef);
      put_f64(out, p.rho);
      put_u64(out, static_cast<std::uint64_t>(p.iterations));
      put_u32(out, p.converged ? 1 : 0);
    }
  }
  return out;
}

inline TrainedModel deserialize_model(const std::string& bytes, const std::string& what = "model") {
  using namespace detail;
  ByteReader r(bytes, what);
  if (r.str(8) != std::string(kModelMagic, 8)) throw Error(ErrorKind::kInput, what + " is not a model file");
  const auto version = r.u32();
  if (version != kModelVersion) throw Error(ErrorKind::kInput, fmt::format("unsupported model version {}", version));
  const auto kind = r.u32();
  const auto classes = get_ints(r);
  TrainedModel result;
  switch (kind) {
    case 0: {
      LinearModel m;
      m.classes = classes;
      r.str();
      m.config.inv_reg_strength = r.f64();
      m.config.max_iter = static_cast<int>(r.u32());
      m.config.tol = r.f64();
      m.config.seed = r.u64();
      m.W = get_matrix(r);
      m.b = get_vector(r);
      m.epochs = static_cast<int>(r.u32());
      m.converged = r.u32() != 0;
      m.objective_history = get_doubles(r);
      result = std::move(m);
      break;
    }
    case 1: {
      MlpModel m;
      m.classes = classes;
      r.str();
      auto& c = m.config;
      c.hidden = get_ints(r);
      for (double* v : {&c.l2_alpha, &c.learning_rate, &c.power_t, &c.beta1, &c.beta2, &c.epsilon, &c.tol}) *v = r.f64();
      for (int* v : {&c.max_epochs, &c.batch_size, &c.n_iter_no_change}) *v = static_cast<int>(r.u32());
      c.seed = r.u64();
      m.layers = get_ints(r);
      m.params = get_vector(r);
      if (m.layers.size() < 2 || static_cast<std::size_t>(m.params.size()) != mlp_param_count(m.layers)) {
        throw Error(ErrorKind::kInput, what + ": MLP parameter count does not match layer sizes");
      }
      m.epochs = static_cast<int>(r.u32());
      m.initial_loss = r.f64();
      m.loss_curve = get_doubles(r);
      result = std::move(m);
      break;
    }
    case 2: {
      SvmModel s;
      s.classes = classes;
      r.str();
      auto& c = s.config;
      for (double* v : {&c.C, &c.gamma, &c.coef0, &c.tol}) *v = r.f64();
      c.degree = static_cast<int>(r.u32());
      c.max_iter = static_cast<long>(r.u64());
      c.seed = r.u64();
      s.gamma = r.f64();
      s.support_vectors = get_matrix(r);
      const auto pairs = r.u64();
      for (std::uint64_t p = 0; p < pairs; ++p) {
        SvmPair pair;
        pair.first = static_cast<int>(r.u32());
        pair.second = static_cast<int>(r.u32());
        const auto ns = r.u64();
        r.need(8 * ns);
        for (std::uint64_t k = 0; k < ns; ++k) {
          pair.support.push_back(r.u64());
          if (pair.support.back() >= static_cast<std::size_t>(s.support_vectors.rows())) {
            throw Error(ErrorKind::kInput, what + ": support index out of range");
          }
        }
        pair.coef = get_doubles(r);
        pair.rho = r.f64();
        pair.iterations = static_cast<long>(r.u64());
        pair.converged = r.u32() != 0;
        s.pairs.push_back(std::move(pair));
      }
      result = std::move(s);
      break;
    }
    default: throw Error(ErrorKind::kInput, fmt::format("{}: unknown model kind {}", what, kind));
  }
  if (!r.done()) throw Error(ErrorKind::kInput, "trailing bytes in " + what);
  return result;
}

inline void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_model(model));
}

inline TrainedModel load_model(const std::filesystem::path& path) {
  return deserialize_model(read_file_bytes(path), path.string());
}

}  // namespace poxbench
