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
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fsel/error.hpp"
#include "fsel/image.hpp"
#include "fsel/imaging/augment.hpp"
#include "fsel/imaging/geometry.hpp"
#include "fsel/nn/network.hpp"
#include "fsel/parallel.hpp"
#include "fsel/rng.hpp"

namespace fsel::scoring {

enum class Scorer { Consistency, Entropy, McDropout, Random };

inline const char* to_string(Scorer s) {
  switch (s) {
    case Scorer::Consistency: return "consistency";
    case Scorer::Entropy: return "entropy";
    case Scorer::McDropout: return "mc_dropout";
    case Scorer::Random: return "random";
  }
  return "?";
}

inline Scorer scorer_from_string(const std::string& s) {
  for (auto k : {Scorer::Consistency, Scorer::Entropy, Scorer::McDropout, Scorer::Random})
    if (s == to_string(k)) return k;
  throw Error("malformed_config", "unknown scorer '" + s + "'");
}

/// Pixel set: auto-contrast, brightness, sharpness. Affine set (ablation):
/// 30 degree rotation and 30% shifts along x and y.
enum class AugSet { Pixel, Affine };

inline AugSet aug_set_from_string(const std::string& s) {
  if (s == "pixel") return AugSet::Pixel;
  if (s == "affine") return AugSet::Affine;
  throw Error("malformed_config", "aug_set must be pixel or affine, got '" + s + "'");
}

inline const char* to_string(AugSet a) { return a == AugSet::Pixel ? "pixel" : "affine"; }

struct ScoreRecord {
  PatchRef patch;
  Scorer scorer = Scorer::Consistency;
  double value = 0.0;
  std::optional<double> psi;
};

inline std::vector<GrayImage> augmentations(const GrayImage& x, double psi, AugSet set) {
  if (set == AugSet::Pixel)
    return {imaging::autocontrast(x), imaging::brightness(x, psi), imaging::sharpness(x, psi)};
  return {imaging::rotate30(x), imaging::translate_x(x), imaging::translate_y(x)};
}

/// Cross-entropy of the augmented predictions against the clean prediction,
/// pixel-averaged per augmentation and summed over the augmentation set.
/// Only the yhat * log(yhat_A) term carries the class weight w.
inline double consistency_from_predictions(const PredictionMap& clean, const std::vector<PredictionMap>& augmented,
                                           double w) {
  double score = 0.0;
  const double inv_n = 1.0 / static_cast<double>(clean.size());
  for (const auto& ya : augmented) {
    require_same_shape(clean, ya, "consistency_score");
    double s = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
      const double y = clean.pixels[i], q = ya.pixels[i];
      s += w * y * std::log(q) + (1.0 - y) * std::log(1.0 - q);
    }
    score -= s * inv_n;
  }
  return score;
}

inline double consistency_score(const nn::ModelParams& params, const GrayImage& patch, double psi, double w,
                                AugSet set = AugSet::Pixel) {
  imaging::check_psi(psi);
  FSEL_CHECK(w > 0.0, "invalid_weight", "class weight must be positive");
  const PredictionMap clean = nn::forward(params, patch);
  std::vector<PredictionMap> aug;
  for (const auto& a : augmentations(patch, psi, set)) aug.push_back(nn::forward(params, a));
  return consistency_from_predictions(clean, aug, w);
}

/// Mean binary Shannon entropy (nats) of a probability map.
inline double mean_entropy(const PredictionMap& p) {
  double s = 0.0;
  for (double v : p.pixels) s -= v * std::log(v) + (1.0 - v) * std::log(1.0 - v);
  return s / static_cast<double>(p.size());
}

inline double entropy_score(const nn::ModelParams& params, const GrayImage& patch) {
  return mean_entropy(nn::forward(params, patch));
}

inline std::uint64_t mc_pass_seed(std::uint64_t seed, std::size_t pass) { return hash_combine(seed, pass); }

/// Entropy of the mean of `passes` dropout-active predictions.
inline double mc_dropout_score(const nn::ModelParams& params, const GrayImage& patch, std::size_t passes,
                               std::uint64_t seed) {
  FSEL_CHECK(passes >= 1, "malformed_config", "mc_passes must be at least 1");
  // running mean: identical passes reproduce the single-pass map exactly
  PredictionMap mean(patch.height, patch.width, 0.0);
  for (std::size_t k = 0; k < passes; ++k) {
    const auto p = nn::forward(params, patch, true, mc_pass_seed(seed, k));
    const double inv = 1.0 / static_cast<double>(k + 1);
    for (std::size_t i = 0; i < mean.size(); ++i) mean.pixels[i] += (p.pixels[i] - mean.pixels[i]) * inv;
  }
  return mean_entropy(mean);
}

/// Stable per-patch stream key.
inline std::uint64_t patch_key(std::uint64_t seed, const PatchRef& p) {
  return hash_combine(hash_combine(hash_combine(seed, fnv1a(p.image_id)), p.row), p.col);
}

/// Uniform [0,1) draw keyed by (seed, image_id, row, col).
inline double random_score(const PatchRef& patch, std::uint64_t seed) {
  return unit_double(splitmix64(patch_key(seed, patch)));
}

struct ScoringConfig {
  Scorer scorer = Scorer::Consistency;
  double psi = 1.3;
  double w = 1.0;
  AugSet aug_set = AugSet::Pixel;
  std::size_t mc_passes = 10;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

using PatchSource = std::function<GrayImage(const PatchRef&)>;

inline double score_patch(const nn::ModelParams& params, const PatchRef& ref, const GrayImage& pixels,
                          const ScoringConfig& cfg) {
  switch (cfg.scorer) {
    case Scorer::Consistency: return consistency_score(params, pixels, cfg.psi, cfg.w, cfg.aug_set);
    case Scorer::Entropy: return entropy_score(params, pixels);
    case Scorer::McDropout: return mc_dropout_score(params, pixels, cfg.mc_passes, patch_key(cfg.seed, ref));
    case Scorer::Random: return random_score(ref, cfg.seed);
  }
  return 0.0;
}

/// One record per pool entry, in pool order. Parameters are read-only.
inline std::vector<ScoreRecord> score_pool(const nn::ModelParams& params, const std::vector<PatchRef>& pool,
                                           const PatchSource& source, const ScoringConfig& cfg) {
  FSEL_CHECK(!pool.empty(), "empty_pool", "score_pool: pool is empty");
  std::vector<ScoreRecord> out(pool.size());
  std::vector<std::string> failures(pool.size());
  const std::optional<double> psi =
      cfg.scorer == Scorer::Consistency ? std::optional<double>(cfg.psi) : std::nullopt;
  parallel_for(pool.size(), cfg.threads, [&](std::size_t i) {
    try {
      const double v = cfg.scorer == Scorer::Random ? random_score(pool[i], cfg.seed)
                                                    : score_patch(params, pool[i], source(pool[i]), cfg);
      FSEL_CHECK(std::isfinite(v), "non_finite_score", "score is not finite");
      out[i] = {pool[i], cfg.scorer, v, psi};
    } catch (const std::exception& e) {
      failures[i] = pool[i].image_id + "@" + std::to_string(pool[i].row) + "," + std::to_string(pool[i].col) +
                    ": " + e.what();
    }
  });
  std::string msg;
  std::size_t failed = 0;
  for (const auto& f : failures)
    if (!f.empty()) {
      msg += (failed++ ? "; " : "") + f;
    }
  if (failed) throw Error("scoring_failed", std::to_string(failed) + " patch(es) failed: " + msg);
  return out;
}

}  // namespace fsel::scoring
