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

#include "fsel/image.hpp"

namespace fsel::imaging {

inline constexpr Rgb kTruePositive{255, 255, 255};
inline constexpr Rgb kTrueNegative{0, 0, 0};
inline constexpr Rgb kFalsePositive{255, 0, 0};
inline constexpr Rgb kFalseNegative{0, 255, 0};

/// FP red, FN green, TN black, TP white.
inline RgbImage confusion_overlay(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_shape(pred, gt, "confusion_overlay");
  RgbImage out(pred.height, pred.width);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred.pixels[i], g = gt.pixels[i];
    out.pixels[i] = p ? (g ? kTruePositive : kFalsePositive) : (g ? kFalseNegative : kTrueNegative);
  }
  return out;
}

}  // namespace fsel::imaging
