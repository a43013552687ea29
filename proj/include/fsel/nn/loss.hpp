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
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fsel/error.hpp"
#include "fsel/image.hpp"

namespace fsel::nn {

/// Predictions are clamped to [kProbEps, 1 - kProbEps] before any log.
inline constexpr double kProbEps = 1e-7;

inline double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

struct LossWithGrad {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d pred, same layout as pred
};

/// Pixel-mean weighted binary cross-entropy; the foreground term is scaled by w.
inline LossWithGrad weighted_bce(const PredictionMap& pred, const BinaryMask& target, double w) {
  require_same_shape(pred, target, "weighted_bce");
  FSEL_CHECK(w > 0.0, "invalid_weight", "class weight must be positive");
  const std::size_t n = pred.size();
  FSEL_CHECK(n > 0, "shape_mismatch", "weighted_bce on empty raster");
  LossWithGrad out;
  out.grad.resize(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = pred.pixels[i];
    const double y = target.pixels[i] ? 1.0 : 0.0;
    sum += w * y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    out.grad[i] = -inv_n * (w * y / p - (1.0 - y) / (1.0 - p));
  }
  out.loss = -sum * inv_n;
  return out;
}

enum class WeightOrientation { BgOverFg, FgOverBg };

inline WeightOrientation weight_orientation_from_string(const std::string& s) {
  if (s == "bg_over_fg") return WeightOrientation::BgOverFg;
  if (s == "fg_over_bg") return WeightOrientation::FgOverBg;
  throw Error("malformed_config", "weight_orientation must be bg_over_fg or fg_over_bg, got '" + s + "'");
}

/// Dataset-level class weight from pixel counts. Throws "degenerate_dataset"
/// when there is no foreground; a dataset without background yields 1.
inline double class_weight(std::span<const BinaryMask> masks,
                           WeightOrientation orient = WeightOrientation::BgOverFg) {
  FSEL_CHECK(!masks.empty(), "degenerate_dataset", "class_weight on empty dataset");
  std::uint64_t fg = 0, total = 0;
  for (const auto& m : masks) {
    total += m.size();
    for (auto v : m.pixels) fg += v ? 1 : 0;
  }
  const std::uint64_t bg = total - fg;
  FSEL_CHECK(fg > 0, "degenerate_dataset", "class_weight: no foreground pixels");
  if (bg == 0) return 1.0;
  return orient == WeightOrientation::BgOverFg ? static_cast<double>(bg) / static_cast<double>(fg)
                                               : static_cast<double>(fg) / static_cast<double>(bg);
}

/// class_weight with the documented fallback of 1 for degenerate datasets.
inline double class_weight_or_one(std::span<const BinaryMask> masks,
                                  WeightOrientation orient = WeightOrientation::BgOverFg) {
  try {
    return class_weight(masks, orient);
  } catch (const Error& e) {
    if (e.code() == "degenerate_dataset") return 1.0;
    throw;
  }
}

}  // namespace fsel::nn
