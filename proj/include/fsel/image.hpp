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

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "fsel/error.hpp"

namespace fsel {

/// Row-major single-channel raster. The tag keeps grayscale images, masks and
/// prediction maps from being mixed up at call sites.
template <typename T, typename Tag>
struct Raster {
  using value_type = T;

  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<T> pixels;

  Raster() = default;
  Raster(std::size_t h, std::size_t w, T fill = T{}) : height(h), width(w), pixels(h * w, fill) {}
  Raster(std::size_t h, std::size_t w, std::vector<T> data)
      : height(h), width(w), pixels(std::move(data)) {
    FSEL_CHECK(pixels.size() == h * w, "shape_mismatch", "raster data length does not match dims");
  }

  std::size_t size() const noexcept { return pixels.size(); }
  T& at(std::size_t r, std::size_t c) { return pixels[r * width + c]; }
  const T& at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }

  template <typename OT, typename OTag>
  bool same_shape(const Raster<OT, OTag>& o) const noexcept {
    return height == o.height && width == o.width;
  }

  friend bool operator==(const Raster& a, const Raster& b) = default;
};

struct GrayTag {};
struct MaskTag {};
struct PredictionTag {};

using GrayImage = Raster<double, GrayTag>;            // values in [0,1]
using BinaryMask = Raster<std::uint8_t, MaskTag>;     // values in {0,1}
using PredictionMap = Raster<double, PredictionTag>;  // foreground probabilities

using Rgb = std::array<std::uint8_t, 3>;
using RgbImage = Raster<Rgb, struct RgbTag>;

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const std::string& what) {
  if (!a.same_shape(b))
    throw Error("shape_mismatch", what + ": " + std::to_string(a.height) + "x" +
                                      std::to_string(a.width) + " vs " + std::to_string(b.height) +
                                      "x" + std::to_string(b.width));
}

/// Identity of a square crop inside a named full-resolution image.
struct PatchRef {
  std::string image_id;
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t size = 256;

  auto key() const { return std::tie(image_id, row, col, size); }
  friend bool operator==(const PatchRef& a, const PatchRef& b) { return a.key() == b.key(); }
  friend bool operator<(const PatchRef& a, const PatchRef& b) { return a.key() < b.key(); }
};

template <typename R>
R crop(const R& src, const PatchRef& p) {
  FSEL_CHECK(p.row + p.size <= src.height && p.col + p.size <= src.width, "patch_out_of_bounds",
             "patch " + p.image_id + "@" + std::to_string(p.row) + "," + std::to_string(p.col) +
                 " exceeds image bounds");
  R out(p.size, p.size);
  for (std::size_t r = 0; r < p.size; ++r)
    for (std::size_t c = 0; c < p.size; ++c) out.at(r, c) = src.at(p.row + r, p.col + c);
  return out;
}

}  // namespace fsel
