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

// Desk-scale stand-in for a real skin-image corpus. Each class owns a smooth
// colour pattern; every image adds its own label-independent smooth pattern
// ("nuisance") and white pixel noise. A fraction of records can be written
// under a wrong class to inject label noise.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "poxbench/core.hpp"
#include "poxbench/dataset.hpp"
#include "poxbench/image.hpp"

namespace poxbench {

/// Class counts of the four-class monkeypox skin image corpus.
inline const std::vector<std::string> kMsidClasses = {"normal", "measles", "chickenpox", "monkeypox"};
inline const std::vector<std::size_t> kMsidCounts = {293, 91, 107, 279};

struct SyntheticCorpusConfig {
  std::vector<std::string> class_names = kMsidClasses;
  std::vector<std::size_t> counts = {10, 10, 10, 10};
  int size = 32;               // square raster side
  int control_grid = 4;        // resolution of the smooth fields
  double class_amplitude = 0.35;
  double nuisance = 0.05;      // label-independent per-image field
  double pixel_noise = 0.02;
  double label_noise = 0.0;    // fraction of records filed under another class
  std::uint64_t seed = 1;
};

/// Counts proportional to `reference` summing to `total` (largest remainder).
inline std::vector<std::size_t> scaled_counts(const std::vector<std::size_t>& reference, std::size_t total) {
  std::size_t n = 0;
  for (auto c : reference) n += c;
  return apportion(reference, static_cast<double>(total) / static_cast<double>(n));
}

namespace detail {

/// Smooth field in [-1, 1]-ish: control_grid^2 normals per channel,
/// bilinearly interpolated to size x size.
inline std::vector<double> smooth_field(Rng& rng, int size, int grid) {
  std::vector<double> ctrl(static_cast<std::size_t>(grid) * grid * 3);
  for (double& v : ctrl) v = rng.normal();
  std::vector<double> out(static_cast<std::size_t>(size) * size * 3);
  for (int y = 0; y < size; ++y) {
    const double gy = (y + 0.5) / size * (grid - 1);
    const int y0 = std::min(static_cast<int>(gy), grid - 2);
    const double ty = gy - y0;
    for (int x = 0; x < size; ++x) {
      const double gx = (x + 0.5) / size * (grid - 1);
      const int x0 = std::min(static_cast<int>(gx), grid - 2);
      const double tx = gx - x0;
      for (int c = 0; c < 3; ++c) {
        auto at = [&](int yy, int xx) { return ctrl[(static_cast<std::size_t>(yy) * grid + xx) * 3 + c]; };
        const double v = (1 - ty) * ((1 - tx) * at(y0, x0) + tx * at(y0, x0 + 1)) +
                         ty * ((1 - tx) * at(y0 + 1, x0) + tx * at(y0 + 1, x0 + 1));
        out[(static_cast<std::size_t>(y) * size + x) * 3 + c] = v;
      }
    }
  }
  return out;
}

}  // namespace detail

struct SyntheticCorpus {
  std::filesystem::path root;
  std::filesystem::path manifest_path;
  DatasetManifest manifest;
  std::vector<int> true_class;  // generating class per record; differs from label under label noise
};

/// Renders one image of class `cls`; image `index` keys the nuisance stream.
inline Raster render_synthetic_image(const SyntheticCorpusConfig& cfg, int cls, std::size_t index) {
  Rng class_rng(cfg.seed, {0x636c617373ULL, static_cast<std::uint64_t>(cls)});
  const auto pattern = detail::smooth_field(class_rng, cfg.size, cfg.control_grid);
  Rng img_rng(cfg.seed, {0x696d616765ULL, static_cast<std::uint64_t>(index)});
  const auto nuisance = detail::smooth_field(img_rng, cfg.size, cfg.control_grid);
  Raster img(cfg.size, cfg.size, 3);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const double v = 0.5 + cfg.class_amplitude * pattern[i] + cfg.nuisance * nuisance[i] +
                     cfg.pixel_noise * img_rng.normal();
    img.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::round(255.0 * v), 0.0, 255.0));
  }
  return img;
}

/// Writes `root/<class>/<class>_<i>.png` plus `root/manifest.tsv` and returns
/// the loaded manifest.
inline SyntheticCorpus generate_corpus(const std::filesystem::path& root, const SyntheticCorpusConfig& cfg) {
  namespace fs = std::filesystem;
  if (cfg.class_names.size() != cfg.counts.size() || cfg.class_names.size() < 2) {
    throw Error(ErrorKind::kConfig, "synthetic corpus needs >= 2 classes with one count each");
  }
  if (cfg.size < 4 || cfg.control_grid < 2) throw Error(ErrorKind::kConfig, "synthetic raster too small");
  const std::size_t C = cfg.class_names.size();

  SyntheticCorpus out;
  out.root = root;
  out.manifest_path = root / "manifest.tsv";
  struct Row {
    std::size_t label;
    int generating;
    std::string rel;
  };
  std::vector<Row> rows;
  Rng noise_rng(cfg.seed, {0x6c6e6f697365ULL});
  std::size_t index = 0;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < cfg.counts[c]; ++i, ++index) {
      std::size_t label = c;
      if (cfg.label_noise > 0.0 && noise_rng.bernoulli(cfg.label_noise)) {
        label = (c + 1 + noise_rng.below(C - 1)) % C;
      }
      const fs::path rel = fs::path(cfg.class_names[label]) / fmt::format("{}_{:05d}.png", cfg.class_names[c], index);
      write_png(root / rel, render_synthetic_image(cfg, static_cast<int>(c), index));
      rows.push_back({label, static_cast<int>(c), rel.generic_string()});
    }
  }
  // Class-major rows so that first-appearance class ids follow config order.
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.label < b.label; });
  std::string manifest_text = "# path\tclass\n";
  for (const auto& r : rows) {
    manifest_text += r.rel + "\t" + cfg.class_names[r.label] + "\n";
    out.true_class.push_back(r.generating);
  }
  write_file_atomic(out.manifest_path, manifest_text);
  out.manifest = load_manifest(out.manifest_path);
  return out;
}

}  // namespace poxbench
