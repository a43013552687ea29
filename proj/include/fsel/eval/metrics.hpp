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

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fsel/error.hpp"
#include "fsel/image.hpp"

namespace fsel::eval {

/// fg: foreground IoU. fg_bg_mean: mean of foreground and background IoU.
enum class MiouMode { Fg, FgBgMean };

inline MiouMode miou_mode_from_string(const std::string& s) {
  if (s == "fg") return MiouMode::Fg;
  if (s == "fg_bg_mean") return MiouMode::FgBgMean;
  throw Error("malformed_config", "miou mode must be fg or fg_bg_mean, got '" + s + "'");
}

inline const char* to_string(MiouMode m) { return m == MiouMode::Fg ? "fg" : "fg_bg_mean"; }

/// Foreground where the probability exceeds the threshold.
inline BinaryMask binarize(const PredictionMap& p, double threshold = 0.5) {
  BinaryMask m(p.height, p.width);
  for (std::size_t i = 0; i < p.size(); ++i) m.pixels[i] = p.pixels[i] > threshold ? 1 : 0;
  return m;
}

/// IoU of one class (value 1 or 0); two empty sets count as a perfect match.
inline double class_iou(const BinaryMask& pred, const BinaryMask& gt, std::uint8_t cls) {
  require_same_shape(pred, gt, "iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool a = pred.pixels[i] == cls, b = gt.pixels[i] == cls;
    inter += a && b;
    uni += a || b;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double mask_iou(const BinaryMask& pred, const BinaryMask& gt, MiouMode mode = MiouMode::Fg) {
  const double fg = class_iou(pred, gt, 1);
  return mode == MiouMode::Fg ? fg : 0.5 * (fg + class_iou(pred, gt, 0));
}

inline double miou(const PredictionMap& pred, const BinaryMask& gt, double threshold = 0.5,
                   MiouMode mode = MiouMode::Fg) {
  return mask_iou(binarize(pred, threshold), gt, mode);
}

/// Mean of per-image IoU over a test set.
inline double mean_iou(const std::vector<PredictionMap>& preds, const std::vector<BinaryMask>& gts,
                       double threshold = 0.5, MiouMode mode = MiouMode::Fg) {
  FSEL_CHECK(preds.size() == gts.size() && !preds.empty(), "shape_mismatch",
             "mean_iou needs equally many non-zero predictions and masks");
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) s += miou(preds[i], gts[i], threshold, mode);
  return s / static_cast<double>(preds.size());
}

}  // namespace fsel::eval
