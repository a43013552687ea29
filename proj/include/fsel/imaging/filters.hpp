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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>

#include "fsel/image.hpp"

namespace fsel::imaging {

/// 256-bin quantization level of a [0,1] pixel.
inline std::size_t quantize_level(double p) {
  const auto v = static_cast<long>(std::floor(p * 255.999));
  return static_cast<std::size_t>(std::clamp(v, 0L, 255L));
}

/// Global histogram equalization. Level v maps to
/// (cdf(v) - cdf_min) / (N - cdf_min); constant images are returned unchanged.
inline GrayImage equalize(const GrayImage& x) {
  std::array<std::uint64_t, 256> hist{};
  for (double p : x.pixels) ++hist[quantize_level(p)];
  std::array<std::uint64_t, 256> cdf{};
  std::uint64_t run = 0, cdf_min = 0;
  for (std::size_t v = 0; v < 256; ++v) {
    run += hist[v];
    cdf[v] = run;
    if (cdf_min == 0 && run > 0) cdf_min = run;
  }
  const std::uint64_t n = x.size();
  if (n == 0 || cdf_min == n) return x;
  std::array<double, 256> lut{};
  for (std::size_t v = 0; v < 256; ++v)
    lut[v] = cdf[v] < cdf_min ? 0.0
                              : static_cast<double>(cdf[v] - cdf_min) / static_cast<double>(n - cdf_min);
  GrayImage out(x.height, x.width);
  for (std::size_t i = 0; i < n; ++i) out.pixels[i] = lut[quantize_level(x.pixels[i])];
  return out;
}

/// Foreground where the pixel is at or below gamma (dark structures).
inline BinaryMask threshold(const GrayImage& x, double gamma) {
  BinaryMask m(x.height, x.width);
  for (std::size_t i = 0; i < x.size(); ++i) m.pixels[i] = x.pixels[i] <= gamma ? 1 : 0;
  return m;
}

/// 2x2 dilation: each foreground pixel also marks its right, lower and
/// lower-right neighbours. Pixels outside the raster count as background.
inline BinaryMask dilate2x2(const BinaryMask& m) {
  BinaryMask out(m.height, m.width);
  for (std::size_t r = 0; r < m.height; ++r)
    for (std::size_t c = 0; c < m.width; ++c) {
      const bool up = r > 0, left = c > 0;
      out.at(r, c) = m.at(r, c) || (left && m.at(r, c - 1)) || (up && m.at(r - 1, c)) ||
                     (up && left && m.at(r - 1, c - 1));
    }
  return out;
}

}  // namespace fsel::imaging
