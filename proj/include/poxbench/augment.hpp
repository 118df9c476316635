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
#include <filesystem>
#include <string>
#include <type_traits>
#include <vector>

#include <fmt/format.h>

#include "poxbench/core.hpp"
#include "poxbench/dataset.hpp"
#include "poxbench/image.hpp"

namespace poxbench {

/// Conventional kernel-size-to-sigma rule for Gaussian smoothing.
inline double default_blur_sigma(int kernel) { return 0.3 * ((kernel - 1) * 0.5 - 1.0) + 0.8; }

struct AugmentPolicy {
  int copies_per_image = 6;
  double hflip_prob = 0.5;
  double blur_prob = 0.5;
  int blur_kernel = 5;
  double blur_sigma = default_blur_sigma(5);
  bool allow_vflip = false;
  double vflip_prob = 0.5;  // only consulted when allow_vflip

  void validate() const {
    auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (copies_per_image < 0) throw Error(ErrorKind::kConfig, "copies_per_image must be >= 0");
    if (!prob_ok(hflip_prob) || !prob_ok(blur_prob) || !prob_ok(vflip_prob)) {
      throw Error(ErrorKind::kConfig, "augmentation probabilities must lie in [0, 1]");
    }
    if (blur_kernel < 3 || blur_kernel % 2 == 0) {
      throw Error(ErrorKind::kConfig, fmt::format("blur kernel {} must be odd and >= 3", blur_kernel));
    }
    if (!(blur_sigma > 0.0)) throw Error(ErrorKind::kConfig, "blur sigma must be positive");
  }

  std::string describe() const {
    return fmt::format("copies={} hflip_p={} blur_p={} blur_kernel={} blur_sigma={:.6f} vflip={}",
                       copies_per_image, hflip_prob, blur_prob, blur_kernel, blur_sigma,
                       allow_vflip ? fmt::format("{}", vflip_prob) : std::string("excluded"));
  }
};

template <typename T>
BasicRaster<T> horizontal_flip(const BasicRaster<T>& img) {
  BasicRaster<T> out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(img.width - 1 - x, y, c) = img.at(x, y, c);
  return out;
}

template <typename T>
BasicRaster<T> vertical_flip(const BasicRaster<T>& img) {
  BasicRaster<T> out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(x, img.height - 1 - y, c) = img.at(x, y, c);
  return out;
}

/// Normalized 1-D Gaussian weights, centre at index kernel/2.
inline std::vector<double> gaussian_kernel(int kernel, double sigma) {
  if (kernel < 1 || kernel % 2 == 0) {
    throw Error(ErrorKind::kConfig, fmt::format("blur kernel {} must be odd", kernel));
  }
  if (!(sigma > 0.0)) throw Error(ErrorKind::kConfig, "blur sigma must be positive");
  const int r = kernel / 2;
  std::vector<double> w(static_cast<std::size_t>(kernel));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    w[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += w[static_cast<std::size_t>(i + r)];
  }
  for (double& v : w) v /= sum;
  return w;
}

namespace detail {

/// Half-sample symmetric reflection: ... c b a | a b c ... | c b a ...
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

}  // namespace detail

/// Separable Gaussian blur with symmetric reflection at the borders. Integer
/// rasters are rounded and clamped to their range; float rasters are not.
template <typename T>
BasicRaster<T> gaussian_blur(const BasicRaster<T>& img, int kernel, double sigma) {
  if (kernel < 3 || kernel % 2 == 0) {
    throw Error(ErrorKind::kConfig, fmt::format("blur kernel {} must be odd and >= 3", kernel));
  }
  const auto w = gaussian_kernel(kernel, sigma);
  const int r = kernel / 2;
  const int W = img.width, H = img.height, C = img.channels;

  std::vector<double> horiz(static_cast<std::size_t>(W) * H * C, 0.0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int t = -r; t <= r; ++t) {
          acc += w[static_cast<std::size_t>(t + r)] * static_cast<double>(img.at(detail::reflect_index(x + t, W), y, c));
        }
        horiz[(static_cast<std::size_t>(y) * W + x) * C + c] = acc;
      }

  BasicRaster<T> out(W, H, C);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int t = -r; t <= r; ++t) {
          const int yy = detail::reflect_index(y + t, H);
          acc += w[static_cast<std::size_t>(t + r)] * horiz[(static_cast<std::size_t>(yy) * W + x) * C + c];
        }
        if constexpr (std::is_integral_v<T>) {
          const double lo = static_cast<double>(std::numeric_limits<T>::min());
          const double hi = static_cast<double>(std::numeric_limits<T>::max());
          out.at(x, y, c) = static_cast<T>(std::clamp(std::round(acc), lo, hi));
        } else {
          out.at(x, y, c) = static_cast<T>(acc);
        }
      }
  return out;
}

/// Transformations drawn for one (source, copy) pair.
struct AugmentDraw {
  bool hflip = false;
  bool vflip = false;
  bool blur = false;
};

inline AugmentDraw draw_transforms(const AugmentPolicy& policy, std::uint64_t seed, std::size_t source, int copy) {
  Rng rng(seed, {0x617567ULL, static_cast<std::uint64_t>(source), static_cast<std::uint64_t>(copy)});
  AugmentDraw d;
  d.hflip = rng.bernoulli(policy.hflip_prob);
  d.blur = rng.bernoulli(policy.blur_prob);
  const bool v = rng.bernoulli(policy.vflip_prob);
  d.vflip = policy.allow_vflip && v;
  return d;
}

inline Raster apply_transforms(const Raster& src, const AugmentDraw& d, const AugmentPolicy& policy) {
  Raster img = src;
  if (d.hflip) img = horizontal_flip(img);
  if (d.vflip) img = vertical_flip(img);
  if (d.blur) img = gaussian_blur(img, policy.blur_kernel, policy.blur_sigma);
  return img;
}

inline std::filesystem::path augmented_path(const std::filesystem::path& cache_dir, std::uint64_t seed,
                                            std::size_t source, int copy) {
  return cache_dir / "aug" / std::to_string(seed) / fmt::format("{}_{}.png", source, copy);
}

/// Returns `manifest` restricted to `sources` followed by `copies_per_image`
/// derived records per source. Derived images are written as PNG under
/// `<cache_dir>/aug/<seed>/<source>_<copy>.png` and carry the manifest index
/// of their source in `source`; the leading originals carry their own index.
inline DatasetManifest augment_training_set(const DatasetManifest& manifest,
                                            const std::vector<std::size_t>& sources,
                                            const AugmentPolicy& policy, std::uint64_t seed,
                                            const std::filesystem::path& cache_dir, unsigned threads = 1) {
  policy.validate();
  if (sources.empty()) throw Error(ErrorKind::kInput, "augmentation needs at least one image");

  DatasetManifest out = manifest.subset(sources);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    out.records[i].source = sources[i];
    out.records[i].copy = -1;
  }
  const std::size_t copies = static_cast<std::size_t>(policy.copies_per_image);
  std::vector<ImageRecord> derived(sources.size() * copies);

  parallel_for(sources.size(), worker_count(threads), [&](std::size_t s) {
    const std::size_t src_index = sources[s];
    const ImageRecord& src = manifest.records.at(src_index);
    if (copies == 0) return;
    const Raster original = read_image(src.path);
    for (std::size_t c = 0; c < copies; ++c) {
      const int copy = static_cast<int>(c);
      const auto draw = draw_transforms(policy, seed, src_index, copy);
      const Raster img = apply_transforms(original, draw, policy);
      const std::string png = encode_png(img);
      const auto path = augmented_path(cache_dir, seed, src_index, copy);
      write_file_atomic(path, png);
      ImageRecord rec;
      rec.path = path;
      rec.label = src.label;
      rec.width = img.width;
      rec.height = img.height;
      rec.checksum = sha256_hex(png);
      rec.source = src_index;
      rec.copy = copy;
      derived[s * copies + c] = std::move(rec);
    }
  });

  for (auto& r : derived) out.records.push_back(std::move(r));
  return out;
}

}  // namespace poxbench
