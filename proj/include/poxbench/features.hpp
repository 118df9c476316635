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

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <fmt/format.h>
#include <opencv2/dnn.hpp>
#include <opencv2/imgproc.hpp>

#include "poxbench/core.hpp"
#include "poxbench/dataset.hpp"
#include "poxbench/image.hpp"

namespace poxbench {

enum class FeatureSource { kBackbone, kStub, kCache };

inline const char* to_string(FeatureSource s) {
  switch (s) {
    case FeatureSource::kBackbone: return "backbone";
    case FeatureSource::kStub: return "stub";
    case FeatureSource::kCache: return "cache";
  }
  return "?";
}

/// Pretrained backbone consumed from an ONNX file. The defaults describe a
/// ResNet-50 cut before global pooling: 224x224x3 in, 7x7x2048 out.
struct BackboneSpec {
  std::filesystem::path model_path;
  int input_width = 224;
  int input_height = 224;
  int input_channels = 3;
  std::array<float, 3> channel_means{0.485f, 0.456f, 0.406f};
  std::array<float, 3> channel_stds{0.229f, 0.224f, 0.225f};
  std::size_t output_dim = 7 * 7 * 2048;
  std::string resize_filter = "bilinear";

  std::size_t input_dim() const {
    return static_cast<std::size_t>(input_width) * input_height * input_channels;
  }

  /// Digest of everything that determines the extracted values, including
  /// the model file contents.
  std::string digest() const {
    const std::string model_hash = sha256_hex(read_file_bytes(model_path));
    return sha256_hex(fmt::format("backbone;model={};input={}x{}x{};mean={:.9g},{:.9g},{:.9g};std={:.9g},{:.9g},{:.9g};"
                                  "dim={};resize={}",
                                  model_hash, input_width, input_height, input_channels, channel_means[0],
                                  channel_means[1], channel_means[2], channel_stds[0], channel_stds[1],
                                  channel_stds[2], output_dim, resize_filter));
  }
};

/// Deterministic stand-in for the backbone: block-average the image onto a
/// grid x grid raster, average it with its left-right mirror, centre it and
/// apply a seeded Gaussian random projection to `dim` outputs. Each row also
/// gets `jitter`-scaled normal noise keyed by (image checksum, seed).
struct StubSpec {
  std::size_t dim = 256;
  std::uint64_t seed = 0;
  int grid = 8;
  double gain = 3.0;
  double jitter = 0.05;

  std::size_t input_dim() const { return static_cast<std::size_t>(grid) * grid * 3; }

  std::string digest() const {
    return sha256_hex(
        fmt::format("stub;dim={};seed={};grid={};gain={:.9g};jitter={:.9g}", dim, seed, grid, gain, jitter));
  }
};

struct FeatureMatrix {
  SampleMatrix<float> data;
  std::vector<std::size_t> row_ids;  // manifest indices, one per row
  FeatureSource source = FeatureSource::kStub;
  std::string spec_digest;

  std::size_t rows() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(data.cols()); }

  void validate() const {
    if (row_ids.size() != rows()) {
      throw Error(ErrorKind::kContract, fmt::format("{} row ids for {} rows", row_ids.size(), rows()));
    }
    if (!data.allFinite()) throw Error(ErrorKind::kContract, "feature matrix holds NaN or Inf");
    std::unordered_set<std::size_t> seen(row_ids.begin(), row_ids.end());
    if (seen.size() != row_ids.size()) throw Error(ErrorKind::kContract, "duplicate row ids");
  }

  /// Rows at positions `positions`, in order.
  FeatureMatrix select(const std::vector<std::size_t>& positions) const {
    FeatureMatrix out;
    out.source = source;
    out.spec_digest = spec_digest;
    out.data.resize(static_cast<Eigen::Index>(positions.size()), data.cols());
    for (std::size_t i = 0; i < positions.size(); ++i) {
      out.data.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(positions[i]));
      out.row_ids.push_back(row_ids[positions[i]]);
    }
    return out;
  }

  bool operator==(const FeatureMatrix& o) const {
    return row_ids == o.row_ids && spec_digest == o.spec_digest && data.rows() == o.data.rows() &&
           data.cols() == o.data.cols() &&
           std::memcmp(data.data(), o.data.data(), sizeof(float) * static_cast<std::size_t>(data.size())) == 0;
  }
};

// ---------------------------------------------------------------------------
// Backbone extraction.

/// Bilinear resize, [0,1] scaling, per-channel normalization; NCHW blob.
inline cv::Mat preprocess_for_backbone(const Raster& img, const BackboneSpec& spec) {
  cv::Mat rgb(img.height, img.width, CV_8UC3, const_cast<std::uint8_t*>(img.pixels.data()));
  cv::Mat resized;
  cv::resize(rgb, resized, cv::Size(spec.input_width, spec.input_height), 0, 0, cv::INTER_LINEAR);
  const int dims[] = {1, spec.input_channels, spec.input_height, spec.input_width};
  cv::Mat blob(4, dims, CV_32F);
  float* out = blob.ptr<float>();
  const std::size_t plane = static_cast<std::size_t>(spec.input_height) * spec.input_width;
  for (int y = 0; y < spec.input_height; ++y) {
    const auto* row = resized.ptr<cv::Vec3b>(y);
    for (int x = 0; x < spec.input_width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = static_cast<float>(row[x][c]) / 255.0f;
        out[static_cast<std::size_t>(c) * plane + static_cast<std::size_t>(y) * spec.input_width + x] =
            (v - spec.channel_means[static_cast<std::size_t>(c)]) / spec.channel_stds[static_cast<std::size_t>(c)];
      }
    }
  }
  return blob;
}

/// Runs every manifest image through the backbone and flattens its output.
inline FeatureMatrix extract_features(const DatasetManifest& manifest, const BackboneSpec& spec) {
  if (spec.input_channels != 3) throw Error(ErrorKind::kConfig, "backbone input must have 3 channels");
  FeatureMatrix fm;
  fm.source = FeatureSource::kBackbone;
  try {
    fm.spec_digest = spec.digest();
  } catch (const Error& e) {
    throw Error(ErrorKind::kExtraction, std::string("cannot read backbone model: ") + e.what());
  }
  cv::dnn::Net net;
  try {
    net = cv::dnn::readNetFromONNX(spec.model_path.string());
  } catch (const cv::Exception& e) {
    throw Error(ErrorKind::kExtraction, "cannot load backbone " + spec.model_path.string() + ": " + e.what());
  }
  if (net.empty()) throw Error(ErrorKind::kExtraction, "empty backbone network " + spec.model_path.string());

  const auto d = static_cast<Eigen::Index>(spec.output_dim);
  fm.data.resize(static_cast<Eigen::Index>(manifest.size()), d);
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const Raster img = read_image(manifest.records[i].path);
    net.setInput(preprocess_for_backbone(img, spec));
    cv::Mat out;
    try {
      out = net.forward();
    } catch (const cv::Exception& e) {
      throw Error(ErrorKind::kExtraction, std::string("backbone forward failed: ") + e.what());
    }
    if (out.total() != spec.output_dim) {
      throw Error(ErrorKind::kContract,
                  fmt::format("backbone produced {} values, spec declares {}", out.total(), spec.output_dim));
    }
    const cv::Mat flat = out.isContinuous() ? out : out.clone();
    std::memcpy(fm.data.row(static_cast<Eigen::Index>(i)).data(), flat.ptr<float>(),
                sizeof(float) * spec.output_dim);
    fm.row_ids.push_back(i);
  }
  fm.validate();
  return fm;
}

// ---------------------------------------------------------------------------
// Stub extraction.

/// Grid-averaged, mirror-symmetrized, centred raster; length grid*grid*3.
inline std::vector<double> stub_pooled_input(const Raster& img, int grid) {
  std::vector<double> cells(static_cast<std::size_t>(grid) * grid * 3, 0.0);
  for (int gy = 0; gy < grid; ++gy) {
    const int y0 = gy * img.height / grid, y1 = std::max(y0 + 1, (gy + 1) * img.height / grid);
    for (int gx = 0; gx < grid; ++gx) {
      const int x0 = gx * img.width / grid, x1 = std::max(x0 + 1, (gx + 1) * img.width / grid);
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) acc += img.at(std::min(x, img.width - 1), std::min(y, img.height - 1), c);
        cells[(static_cast<std::size_t>(gy) * grid + gx) * 3 + c] = acc / ((y1 - y0) * (x1 - x0) * 255.0);
      }
    }
  }
  std::vector<double> out(cells.size());
  for (int gy = 0; gy < grid; ++gy)
    for (int gx = 0; gx < grid; ++gx)
      for (int c = 0; c < 3; ++c) {
        const auto a = cells[(static_cast<std::size_t>(gy) * grid + gx) * 3 + c];
        const auto b = cells[(static_cast<std::size_t>(gy) * grid + (grid - 1 - gx)) * 3 + c];
        out[(static_cast<std::size_t>(gy) * grid + gx) * 3 + c] = 0.5 * (a + b) - 0.5;
      }
  return out;
}

inline FeatureMatrix stub_extract(const DatasetManifest& manifest, const StubSpec& spec, unsigned threads = 1) {
  if (spec.dim < 1) throw Error(ErrorKind::kConfig, "stub feature dimension must be >= 1");
  if (spec.grid < 1) throw Error(ErrorKind::kConfig, "stub grid must be >= 1");
  const std::size_t in = spec.input_dim();
  Eigen::MatrixXd projection(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(spec.dim));
  {
    Rng rng(spec.seed, {0x70726f6aULL});
    const double scale = spec.gain / std::sqrt(static_cast<double>(in));
    for (Eigen::Index j = 0; j < projection.cols(); ++j)
      for (Eigen::Index k = 0; k < projection.rows(); ++k) projection(k, j) = scale * rng.normal();
  }

  FeatureMatrix fm;
  fm.source = FeatureSource::kStub;
  fm.spec_digest = spec.digest();
  fm.data.resize(static_cast<Eigen::Index>(manifest.size()), static_cast<Eigen::Index>(spec.dim));
  fm.row_ids.resize(manifest.size());
  parallel_for(manifest.size(), worker_count(threads), [&](std::size_t i) {
    const auto pooled = stub_pooled_input(read_image(manifest.records[i].path), spec.grid);
    const Eigen::Map<const Eigen::RowVectorXd> v(pooled.data(), static_cast<Eigen::Index>(pooled.size()));
    Eigen::RowVectorXd row = v * projection;
    const std::string& sum = manifest.records[i].checksum;
    const std::uint64_t key = sum.size() >= 16 ? std::stoull(sum.substr(0, 16), nullptr, 16) : 0;
    Rng noise(spec.seed, {0x6a6974746572ULL, key});
    for (Eigen::Index j = 0; j < row.size(); ++j) row(j) += spec.jitter * noise.normal();
    fm.data.row(static_cast<Eigen::Index>(i)) = row.cast<float>();
    fm.row_ids[i] = i;
  });
  fm.validate();
  return fm;
}

inline FeatureMatrix stub_extract(const DatasetManifest& manifest, std::size_t dim, std::uint64_t seed) {
  StubSpec spec;
  spec.dim = dim;
  spec.seed = seed;
  return stub_extract(manifest, spec);
}

// ---------------------------------------------------------------------------
// Cache files.
//
// Layout (little-endian): "PXFEAT\0\0", u32 version, u32 source, u64 n, u64 d,
// 64 ASCII hex chars of spec digest, u64 row_ids[n], f32 data[n*d].

namespace detail {

constexpr char kCacheMagic[8] = {'P', 'X', 'F', 'E', 'A', 'T', '\0', '\0'};
constexpr std::uint32_t kCacheVersion = 1;

}  // namespace detail

inline std::string encode_feature_cache(const FeatureMatrix& m) {
  if (m.spec_digest.size() != 64) throw Error(ErrorKind::kContract, "spec digest must be 64 hex chars");
  std::string out(detail::kCacheMagic, sizeof(detail::kCacheMagic));
  detail::put_u32(out, detail::kCacheVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(m.source));
  detail::put_u64(out, m.rows());
  detail::put_u64(out, m.dim());
  out += m.spec_digest;
  for (auto id : m.row_ids) detail::put_u64(out, id);
  out.reserve(out.size() + 4 * static_cast<std::size_t>(m.data.size()));
  for (Eigen::Index i = 0; i < m.data.rows(); ++i)
    for (Eigen::Index j = 0; j < m.data.cols(); ++j) detail::put_u32(out, std::bit_cast<std::uint32_t>(m.data(i, j)));
  return out;
}

inline void cache_store(const FeatureMatrix& m, const std::filesystem::path& path) {
  m.validate();
  write_file_atomic(path, encode_feature_cache(m));
}

/// Loads a cache file. When `expected_digest` is given and differs from the
/// stored spec digest the cache is stale.
inline FeatureMatrix cache_load(const std::filesystem::path& path,
                                std::optional<std::string> expected_digest = std::nullopt) {
  const std::string bytes = read_file_bytes(path);
  detail::ByteReader r(bytes, "feature cache " + path.string());
  if (r.str(8) != std::string(detail::kCacheMagic, 8)) {
    throw Error(ErrorKind::kInput, path.string() + " is not a feature cache");
  }
  const auto version = r.u32();
  if (version != detail::kCacheVersion) {
    throw Error(ErrorKind::kInput, fmt::format("unsupported feature cache version {}", version));
  }
  r.u32();  // producing source
  const auto n = r.u64();
  const auto d = r.u64();
  FeatureMatrix m;
  m.source = FeatureSource::kCache;
  m.spec_digest = r.str(64);
  if (expected_digest && *expected_digest != m.spec_digest) {
    throw Error(ErrorKind::kStaleCache,
                fmt::format("{} was produced by spec {}, expected {}", path.string(), m.spec_digest, *expected_digest));
  }
  r.need(8 * n + 4 * n * d);
  m.row_ids.resize(n);
  for (auto& id : m.row_ids) id = r.u64();
  m.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < m.data.rows(); ++i)
    for (Eigen::Index j = 0; j < m.data.cols(); ++j) m.data(i, j) = r.f32();
  if (!r.done()) throw Error(ErrorKind::kInput, "trailing bytes in " + path.string());
  return m;
}

}  // namespace poxbench
