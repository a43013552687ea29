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
#include <cstddef>

#include "fsel/error.hpp"
#include "fsel/image.hpp"

namespace fsel::imaging {

inline void check_psi(double psi) {
  FSEL_CHECK(psi > 0.0, "invalid_magnitude", "augmentation magnitude psi must be positive");
}

/// Min-max stretch to [0,1]; constant images are unchanged.
inline GrayImage autocontrast(const GrayImage& x) {
  if (x.size() == 0) return x;
  const auto [lo, hi] = std::minmax_element(x.pixels.begin(), x.pixels.end());
  const double mn = *lo, mx = *hi;
  if (!(mx > mn)) return x;
  GrayImage out(x.height, x.width);
  const double scale = 1.0 / (mx - mn);
  for (std::size_t i = 0; i < x.size(); ++i) out.pixels[i] = std::clamp((x.pixels[i] - mn) * scale, 0.0, 1.0);
  return out;
}

/// Pure gain, clamped.
inline GrayImage brightness(const GrayImage& x, double psi) {
  check_psi(psi);
  GrayImage out(x.height, x.width);
  for (std::size_t i = 0; i < x.size(); ++i) out.pixels[i] = std::clamp(psi * x.pixels[i], 0.0, 1.0);
  return out;
}

/// x - smooth(x) for the 3x3 kernel [[1,1,1],[1,5,1],[1,1,1]]/13 with
/// replicated borders. Written as a sum of neighbour differences so flat
/// regions give exactly zero.
inline GrayImage detail3x3(const GrayImage& x) {
  GrayImage out(x.height, x.width);
  const long h = static_cast<long>(x.height), w = static_cast<long>(x.width);
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c) {
      const double centre = x.at(r, c);
      double s = 0.0;
      for (long dr = -1; dr <= 1; ++dr)
        for (long dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const long rr = std::clamp(r + dr, 0L, h - 1), cc = std::clamp(c + dc, 0L, w - 1);
          s += centre - x.at(rr, cc);
        }
      out.at(r, c) = s / 13.0;
    }
  return out;
}

/// Unsharp blend x + (psi - 1)(x - smooth(x)), clamped.
inline GrayImage sharpness(const GrayImage& x, double psi) {
  check_psi(psi);
  const GrayImage detail = detail3x3(x);
  GrayImage out(x.height, x.width);
  for (std::size_t i = 0; i < x.size(); ++i)
    out.pixels[i] = std::clamp(x.pixels[i] + (psi - 1.0) * detail.pixels[i], 0.0, 1.0);
  return out;
}

}  // namespace fsel::imaging
