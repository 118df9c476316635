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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>

#include "poxbench/core.hpp"

namespace poxbench {

struct ClassLabel {
  int id = 0;
  std::string name;
  bool operator==(const ClassLabel&) const = default;
};

struct ImageRecord {
  std::filesystem::path path;
  int label = 0;
  int width = 0;
  int height = 0;
  std::string checksum;
  // Set by augmentation: manifest index of the original this record is (copy
  // == -1) or was derived from (copy >= 0).
  std::optional<std::size_t> source;
  int copy = -1;

  bool derived() const { return copy >= 0; }
};

struct DatasetManifest {
  std::vector<ImageRecord> records;
  std::vector<ClassLabel> classes;
  std::vector<std::string> skipped;  // paths that failed to decode

  std::size_t size() const { return records.size(); }
  std::size_t class_count() const { return classes.size(); }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(classes.size(), 0);
    for (const auto& r : records) ++counts[static_cast<std::size_t>(r.label)];
    return counts;
  }

  std::vector<int> labels() const {
    std::vector<int> y;
    y.reserve(records.size());
    for (const auto& r : records) y.push_back(r.label);
    return y;
  }

  std::optional<int> class_id(std::string_view name) const {
    for (const auto& c : classes) {
      if (c.name == name) return c.id;
    }
    return std::nullopt;
  }

  /// Records at `indices`, in that order, sharing the class table.
  DatasetManifest subset(const std::vector<std::size_t>& indices) const {
    DatasetManifest out;
    out.classes = classes;
    out.records.reserve(indices.size());
    for (std::size_t i : indices) out.records.push_back(records.at(i));
    return out;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline bool has_image_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

inline int intern_class(DatasetManifest& m, const std::string& name) {
  if (auto id = m.class_id(name)) return *id;
  const int id = static_cast<int>(m.classes.size());
  m.classes.push_back({id, name});
  return id;
}

/// Fills checksum and raster size; false when the image does not decode.
inline bool probe_record(ImageRecord& rec) {
  std::string bytes;
  try {
    bytes = read_file_bytes(rec.path);
  } catch (const Error&) {
    return false;
  }
  std::vector<std::uint8_t> buf(bytes.begin(), bytes.end());
  cv::Mat img = cv::imdecode(buf, cv::IMREAD_COLOR);
  if (img.empty()) return false;
  rec.width = img.cols;
  rec.height = img.rows;
  rec.checksum = sha256_hex(bytes);
  return true;
}

}  // namespace detail

/// Loads either a tab-separated manifest file (`relative/path<TAB>class`) or a
/// directory laid out as `root/<class_name>/<image>`. Images that do not
/// decode are skipped and listed in `skipped`.
inline DatasetManifest load_manifest(const std::filesystem::path& root, Warnings* warnings = nullptr) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::exists(root, ec)) {
    throw Error(ErrorKind::kConfig, "dataset root does not exist: " + root.string());
  }

  DatasetManifest m;
  std::vector<std::pair<fs::path, std::string>> rows;

  if (fs::is_regular_file(root)) {
    std::ifstream in(root);
    if (!in) throw Error(ErrorKind::kConfig, "cannot read manifest " + root.string());
    const fs::path base = root.parent_path();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = detail::trim(line);
      if (t.empty() || t.front() == '#') continue;
      const auto tab = t.find('\t');
      if (tab == std::string::npos) {
        throw Error(ErrorKind::kConfig,
                    fmt::format("{}:{}: expected 'path<TAB>class'", root.string(), lineno));
      }
      const std::string rel = detail::trim(t.substr(0, tab));
      const std::string cls = detail::trim(t.substr(tab + 1));
      if (rel.empty() || cls.empty()) {
        throw Error(ErrorKind::kConfig, fmt::format("{}:{}: empty field", root.string(), lineno));
      }
      rows.emplace_back(base / rel, cls);
    }
  } else if (fs::is_directory(root)) {
    std::vector<fs::path> class_dirs;
    for (const auto& e : fs::directory_iterator(root)) {
      if (e.is_directory()) class_dirs.push_back(e.path());
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    for (const auto& dir : class_dirs) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && detail::has_image_extension(e.path())) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      const std::string cls = dir.filename().string();
      detail::intern_class(m, cls);
      for (auto& f : files) rows.emplace_back(std::move(f), cls);
    }
  } else {
    throw Error(ErrorKind::kConfig, "dataset root is neither a file nor a directory: " + root.string());
  }

  for (auto& [path, cls] : rows) {
    ImageRecord rec;
    rec.path = path;
    rec.label = detail::intern_class(m, cls);
    if (!detail::probe_record(rec)) {
      warn(warnings, "skipping undecodable image " + path.string());
      m.skipped.push_back(path.string());
      continue;
    }
    m.records.push_back(std::move(rec));
  }
  return m;
}

/// Writes the canonical tab-separated manifest, paths relative to `path`'s directory.
inline void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  const fs::path base = path.parent_path();
  std::ostringstream out;
  out << "# path\tclass\n";
  for (const auto& r : m.records) {
    out << fs::relative(r.path, base.empty() ? fs::current_path() : base).generic_string() << '\t'
        << m.classes.at(static_cast<std::size_t>(r.label)).name << '\n';
  }
  write_file_atomic(path, out.str());
}

// ---------------------------------------------------------------------------
// Split plans.

struct SplitPlan {
  std::vector<std::size_t> test_indices;   // sorted
  std::vector<std::size_t> train_indices;  // sorted
  std::vector<int> fold_of;                // parallel to train_indices; empty until folds assigned
  int k = 0;
  std::uint64_t seed = 0;

  bool has_folds() const { return k > 0 && fold_of.size() == train_indices.size(); }

  /// Training-pool indices assigned to validation fold `f`.
  std::vector<std::size_t> fold_members(int f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < train_indices.size(); ++i) {
      if (fold_of[i] == f) out.push_back(train_indices[i]);
    }
    return out;
  }

  /// Training-pool indices outside fold `f`.
  std::vector<std::size_t> training_members(int f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < train_indices.size(); ++i) {
      if (fold_of[i] != f) out.push_back(train_indices[i]);
    }
    return out;
  }

  std::string serialize() const {
    std::ostringstream out;
    out << "seed=" << seed << "\nk=" << k << "\ntest=";
    for (std::size_t i = 0; i < test_indices.size(); ++i) out << (i ? "," : "") << test_indices[i];
    out << "\ntrain=";
    for (std::size_t i = 0; i < train_indices.size(); ++i) {
      out << (i ? "," : "") << train_indices[i];
      if (has_folds()) out << ':' << fold_of[i];
    }
    out << '\n';
    return out.str();
  }
};

namespace detail {

/// Per-class record indices ordered by (checksum, index) and then shuffled
/// with a stream keyed by (seed, tag, class id). Depends only on content, so
/// the result is independent of filesystem enumeration order.
inline std::vector<std::size_t> class_order(const DatasetManifest& m,
                                            const std::vector<std::size_t>& members,
                                            std::uint64_t seed, std::uint64_t tag, int cls) {
  std::vector<std::size_t> idx = members;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& ca = m.records[a].checksum;
    const auto& cb = m.records[b].checksum;
    return ca != cb ? ca < cb : a < b;
  });
  Rng rng(seed, {tag, static_cast<std::uint64_t>(cls)});
  rng.shuffle(idx);
  return idx;
}

constexpr std::uint64_t kHoldoutTag = 0x686f6c646f7574ULL;
constexpr std::uint64_t kFoldTag = 0x6b666f6c64ULL;

}  // namespace detail

/// Largest-remainder apportionment of round(fraction * n) over class sizes.
/// Ties on the remainder go to the lower class id.
inline std::vector<std::size_t> apportion(const std::vector<std::size_t>& counts, double fraction) {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  const auto total = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> quota(counts.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const double exact = fraction * static_cast<double>(counts[c]);
    // Guard against exact.999999 from binary fractions such as 0.1.
    const double fl = std::floor(exact + 1e-9);
    quota[c] = static_cast<std::size_t>(fl);
    assigned += quota[c];
    remainders.emplace_back(exact - fl, c);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
    if (std::abs(a.first - b.first) > 1e-9) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t i = 0; assigned < total && i < remainders.size(); ++i) {
    const std::size_t c = remainders[i].second;
    if (quota[c] < counts[c]) {
      ++quota[c];
      ++assigned;
    }
  }
  return quota;
}

/// Stratified hold-out: per-class largest-remainder quotas, members chosen by
/// a per-class seeded shuffle.
inline SplitPlan stratified_holdout(const DatasetManifest& m, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(ErrorKind::kConfig, fmt::format("hold-out fraction {} outside (0, 1)", fraction));
  }
  const std::size_t C = m.class_count();
  std::vector<std::vector<std::size_t>> members(C);
  for (std::size_t i = 0; i < m.size(); ++i) members[static_cast<std::size_t>(m.records[i].label)].push_back(i);

  std::vector<std::size_t> counts(C);
  for (std::size_t c = 0; c < C; ++c) {
    if (members[c].empty()) {
      throw Error(ErrorKind::kStratification, "class '" + m.classes[c].name + "' has no samples");
    }
    counts[c] = members[c].size();
  }
  const auto quota = apportion(counts, fraction);

  SplitPlan plan;
  plan.seed = seed;
  for (std::size_t c = 0; c < C; ++c) {
    if (quota[c] == 0) {
      throw Error(ErrorKind::kStratification,
                  fmt::format("fraction {} leaves class '{}' ({} samples) without test samples", fraction,
                              m.classes[c].name, counts[c]));
    }
    const auto order = detail::class_order(m, members[c], seed, detail::kHoldoutTag, static_cast<int>(c));
    for (std::size_t j = 0; j < order.size(); ++j) {
      (j < quota[c] ? plan.test_indices : plan.train_indices).push_back(order[j]);
    }
  }
  std::sort(plan.test_indices.begin(), plan.test_indices.end());
  std::sort(plan.train_indices.begin(), plan.train_indices.end());
  return plan;
}

/// Assigns the training pool of `plan` to k stratified folds. Every class puts
/// floor(n_c / k) members in each fold; the n_c mod k leftovers ("extras") go
/// to distinct folds. The first (sum of extras mod k) folds in a seeded fold
/// order are the large ones. Each class then chooses how many of its extras
/// land in large folds so that |count_f(c) - |f| n_c / N| <= 1 everywhere.
inline SplitPlan stratified_kfold(SplitPlan plan, const DatasetManifest& m, int k, std::uint64_t seed,
                                  Warnings* warnings = nullptr) {
  if (k < 2) throw Error(ErrorKind::kConfig, fmt::format("fold count {} < 2", k));
  if (static_cast<std::size_t>(k) > plan.train_indices.size()) {
    throw Error(ErrorKind::kConfig,
                fmt::format("fold count {} exceeds training size {}", k, plan.train_indices.size()));
  }
  const std::size_t C = m.class_count();
  const auto K = static_cast<std::size_t>(k);
  const std::size_t N = plan.train_indices.size();
  std::vector<std::vector<std::size_t>> members(C);
  for (std::size_t i : plan.train_indices) members[static_cast<std::size_t>(m.records[i].label)].push_back(i);

  std::size_t total_extra = 0, base_size = 0;
  for (std::size_t c = 0; c < C; ++c) {
    if (!members[c].empty() && members[c].size() < K) {
      warn(warnings, fmt::format("class '{}' has {} training samples, fewer than {} folds", m.classes[c].name,
                                 members[c].size(), k));
    }
    total_extra += members[c].size() % K;
    base_size += members[c].size() / K;
  }
  const std::size_t L = total_extra % K;        // number of large folds
  const std::size_t base_extra = total_extra / K;

  std::vector<std::size_t> fold_perm(K);
  for (std::size_t f = 0; f < K; ++f) fold_perm[f] = f;
  Rng(seed, {detail::kFoldTag, 0x72616e6bULL}).shuffle(fold_perm);

  // a[c]: extras of class c placed in large folds; bounds from the deviation limit.
  const double small_size = static_cast<double>(base_size + base_extra);
  const double large_size = small_size + 1.0;
  std::vector<std::size_t> a_lo(C), a_hi(C), a(C);
  std::size_t target = L * (base_extra + 1), sum_lo = 0;
  for (std::size_t c = 0; c < C; ++c) {
    const std::size_t n = members[c].size(), r = n % K;
    const double p = static_cast<double>(n) / static_cast<double>(N);
    const double fl = static_cast<double>(n / K);
    auto within = [&](double count, double size) { return std::abs(count - size * p) <= 1.0 + 1e-12; };
    a_lo[c] = r > K - L ? r - (K - L) : 0;
    a_hi[c] = std::min(r, L);
    if (!within(fl + 1.0, small_size)) a_lo[c] = std::max(a_lo[c], std::min(r, L));
    if (!within(fl, large_size)) a_lo[c] = std::max(a_lo[c], std::min(r, L));
    a[c] = std::min(a_lo[c], a_hi[c]);
    sum_lo += a[c];
  }
  std::size_t placed = sum_lo;
  for (std::size_t c = 0; c < C && placed < target; ++c) {
    const std::size_t add = std::min(a_hi[c] - a[c], target - placed);
    a[c] += add;
    placed += add;
  }
  for (std::size_t c = 0; c < C && placed > target; ++c) {
    const std::size_t sub = std::min(a[c], placed - target);
    a[c] -= sub;
    placed -= sub;
  }
  if (placed != target || sum_lo > target) {
    warn(warnings, fmt::format("{}-fold assignment cannot keep every class within one sample of proportional", k));
  }

  // Within each size group, hand extras to the folds with most remaining room.
  std::vector<std::vector<std::size_t>> per_fold(C, std::vector<std::size_t>(K));
  std::vector<std::size_t> room(K);
  for (std::size_t r = 0; r < K; ++r) room[fold_perm[r]] = r < L ? base_extra + 1 : base_extra;
  std::vector<std::size_t> by_demand(C);
  for (std::size_t c = 0; c < C; ++c) by_demand[c] = c;
  std::stable_sort(by_demand.begin(), by_demand.end(), [&](std::size_t x, std::size_t y) {
    return members[x].size() % K > members[y].size() % K;
  });
  auto fill = [&](std::size_t c, std::size_t count, std::size_t first, std::size_t last) {
    std::vector<std::size_t> folds(fold_perm.begin() + static_cast<std::ptrdiff_t>(first),
                                   fold_perm.begin() + static_cast<std::ptrdiff_t>(last));
    std::stable_sort(folds.begin(), folds.end(), [&](std::size_t x, std::size_t y) { return room[x] > room[y]; });
    for (std::size_t j = 0; j < count && j < folds.size(); ++j) {
      ++per_fold[c][folds[j]];
      if (room[folds[j]] > 0) --room[folds[j]];
    }
  };
  for (std::size_t c : by_demand) {
    for (std::size_t f = 0; f < K; ++f) per_fold[c][f] = members[c].size() / K;
    const std::size_t r = members[c].size() % K;
    fill(c, a[c], 0, L);
    fill(c, r - a[c], L, K);
  }

  std::map<std::size_t, int> fold_of;
  for (std::size_t c = 0; c < C; ++c) {
    const auto order = detail::class_order(m, members[c], seed, detail::kFoldTag, static_cast<int>(c));
    std::size_t pos = 0;
    for (std::size_t f = 0; f < K; ++f) {
      for (std::size_t j = 0; j < per_fold[c][f]; ++j) fold_of[order[pos++]] = static_cast<int>(f);
    }
  }
  plan.k = k;
  plan.seed = seed;
  plan.fold_of.clear();
  for (std::size_t idx : plan.train_indices) plan.fold_of.push_back(fold_of.at(idx));
  return plan;
}

}  // namespace poxbench
