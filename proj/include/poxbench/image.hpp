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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "poxbench/core.hpp"

namespace poxbench {

/// Interleaved RGB raster, row-major, `channels` values per pixel.
template <typename T>
struct BasicRaster {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<T> pixels;

  BasicRaster() = default;
  BasicRaster(int w, int h, int c = 3, T fill = T{})
      : width(w), height(h), channels(c),
        pixels(static_cast<std::size_t>(w) * h * c, fill) {}

  T& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  const T& at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool empty() const { return pixels.empty(); }
  bool operator==(const BasicRaster&) const = default;
};

using Raster = BasicRaster<std::uint8_t>;
using RasterF = BasicRaster<float>;

inline Raster from_bgr_mat(const cv::Mat& bgr) {
  Raster out(bgr.cols, bgr.rows, 3);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      out.at(x, y, 0) = row[x][2];
      out.at(x, y, 1) = row[x][1];
      out.at(x, y, 2) = row[x][0];
    }
  }
  return out;
}

inline cv::Mat to_bgr_mat(const Raster& img) {
  cv::Mat bgr(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width; ++x) {
      row[x] = cv::Vec3b(img.at(x, y, 2), img.at(x, y, 1), img.at(x, y, 0));
    }
  }
  return bgr;
}

/// Decodes an image file to RGB; nullopt when the bytes do not decode.
inline std::optional<Raster> try_read_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) return std::nullopt;
  return from_bgr_mat(bgr);
}

inline Raster read_image(const std::filesystem::path& path) {
  auto img = try_read_image(path);
  if (!img) throw Error(ErrorKind::kInput, "cannot decode image " + path.string());
  return std::move(*img);
}

inline std::string encode_png(const Raster& img) {
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".png", to_bgr_mat(img), buf)) {
    throw Error(ErrorKind::kInput, "PNG encoding failed");
  }
  return std::string(buf.begin(), buf.end());
}

inline void write_png(const std::filesystem::path& path, const Raster& img) {
  write_file_atomic(path, encode_png(img));
}

}  // namespace poxbench
