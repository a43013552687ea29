// Copyright 2026 The fsel Authors
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

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "fsel/error.hpp"
#include "fsel/image.hpp"

// 8-bit PNG raster I/O through libpng's simplified API. Colour inputs are
// reduced to grayscale by Rec.601 luma; bytes map to floats as b / 255.
namespace fsel::imaging {

namespace detail {

struct RgbBuffer {
  std::size_t height = 0, width = 0;
  std::vector<std::uint8_t> bytes;  // RGB triples
};

inline RgbBuffer read_rgb(const std::string& path) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw Error("missing_artifact", "cannot read PNG " + path + ": " + img.message);
  img.format = PNG_FORMAT_RGB;
  RgbBuffer buf{img.height, img.width, std::vector<std::uint8_t>(PNG_IMAGE_SIZE(img))};
  if (!png_image_finish_read(&img, nullptr, buf.bytes.data(), 0, nullptr)) {
    png_image_free(&img);
    throw Error("corrupt_image", "cannot decode PNG " + path + ": " + img.message);
  }
  return buf;
}

inline void write_png(const std::string& path, std::size_t h, std::size_t w, std::uint32_t format,
                      const std::vector<std::uint8_t>& bytes) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = format;
  if (!png_image_write_to_file(&img, path.c_str(), 0, bytes.data(), 0, nullptr))
    throw Error("unwritable_output", "cannot write PNG " + path + ": " + img.message);
}

inline std::vector<std::uint8_t> luma_bytes(const RgbBuffer& b) {
  std::vector<std::uint8_t> out(b.height * b.width);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double y = 0.299 * b.bytes[3 * i] + 0.587 * b.bytes[3 * i + 1] + 0.114 * b.bytes[3 * i + 2];
    out[i] = static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
  }
  return out;
}

}  // namespace detail

inline GrayImage read_gray_png(const std::string& path) {
  const auto buf = detail::read_rgb(path);
  const auto luma = detail::luma_bytes(buf);
  GrayImage out(buf.height, buf.width);
  for (std::size_t i = 0; i < luma.size(); ++i) out.pixels[i] = luma[i] / 255.0;
  return out;
}

/// Any nonzero luma byte is foreground.
inline BinaryMask read_mask_png(const std::string& path) {
  const auto buf = detail::read_rgb(path);
  const auto luma = detail::luma_bytes(buf);
  BinaryMask out(buf.height, buf.width);
  for (std::size_t i = 0; i < luma.size(); ++i) {
    const bool any = buf.bytes[3 * i] || buf.bytes[3 * i + 1] || buf.bytes[3 * i + 2];
    out.pixels[i] = any ? 1 : 0;
  }
  return out;
}

inline std::uint8_t to_byte(double p) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(p * 255.0), 0L, 255L));
}

inline void write_gray_png(const std::string& path, const GrayImage& x) {
  std::vector<std::uint8_t> bytes(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) bytes[i] = to_byte(x.pixels[i]);
  detail::write_png(path, x.height, x.width, PNG_FORMAT_GRAY, bytes);
}

inline void write_mask_png(const std::string& path, const BinaryMask& m) {
  std::vector<std::uint8_t> bytes(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) bytes[i] = m.pixels[i] ? 255 : 0;
  detail::write_png(path, m.height, m.width, PNG_FORMAT_GRAY, bytes);
}

inline void write_rgb_png(const std::string& path, const RgbImage& x) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(3 * x.size());
  for (const auto& px : x.pixels) bytes.insert(bytes.end(), px.begin(), px.end());
  detail::write_png(path, x.height, x.width, PNG_FORMAT_RGB, bytes);
}

}  // namespace fsel::imaging
