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

#include <cmath>
#include <cstddef>
#include <numbers>
#include <utility>

#include "fsel/image.hpp"

namespace fsel::imaging {

/// Source coordinate (row, col) sampled by output pixel (r, c) when content
/// is rotated counter-clockwise by `degrees` about the raster centre.
inline std::pair<double, double> rotation_source(std::size_t h, std::size_t w, double r, double c, double degrees) {
  const double t = degrees * std::numbers::pi / 180.0;
  const double cy = (static_cast<double>(h) - 1.0) / 2.0, cx = (static_cast<double>(w) - 1.0) / 2.0;
  const double xd = c - cx, yd = r - cy;
  const double xs = xd * std::cos(t) - yd * std::sin(t);
  const double ys = xd * std::sin(t) + yd * std::cos(t);
  return {ys + cy, xs + cx};
}

/// Nearest-neighbour rotation, zero fill outside the source.
inline GrayImage rotate(const GrayImage& x, double degrees) {
  GrayImage out(x.height, x.width, 0.0);
  for (std::size_t r = 0; r < x.height; ++r)
    for (std::size_t c = 0; c < x.width; ++c) {
      const auto [sr, sc] = rotation_source(x.height, x.width, static_cast<double>(r), static_cast<double>(c), degrees);
      const long rr = std::lround(sr), cc = std::lround(sc);
      if (rr >= 0 && cc >= 0 && rr < static_cast<long>(x.height) && cc < static_cast<long>(x.width))
        out.at(r, c) = x.at(rr, cc);
    }
  return out;
}

inline GrayImage rotate30(const GrayImage& x) { return rotate(x, 30.0); }

/// Shifts content down by dy rows and right by dx columns, zero fill.
inline GrayImage translate(const GrayImage& x, long dy, long dx) {
  GrayImage out(x.height, x.width, 0.0);
  const long h = static_cast<long>(x.height), w = static_cast<long>(x.width);
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c) {
      const long sr = r - dy, sc = c - dx;
      if (sr >= 0 && sc >= 0 && sr < h && sc < w) out.at(r, c) = x.at(sr, sc);
    }
  return out;
}

/// Shift along +x by 30% of the width.
inline GrayImage translate_x(const GrayImage& x) {
  return translate(x, 0, std::lround(0.3 * static_cast<double>(x.width)));
}

/// Shift along +y by 30% of the height.
inline GrayImage translate_y(const GrayImage& x) {
  return translate(x, std::lround(0.3 * static_cast<double>(x.height)), 0);
}

}  // namespace fsel::imaging
