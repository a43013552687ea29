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
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "fsel/error.hpp"
#include "fsel/image.hpp"
#include "fsel/imaging/patches.hpp"
#include "fsel/nn/adam.hpp"
#include "fsel/nn/loss.hpp"
#include "fsel/nn/network.hpp"
#include "fsel/parallel.hpp"
#include "fsel/pseudolabel.hpp"
#include "fsel/rng.hpp"

namespace fsel::training {

enum class Mode { Joint, Reptile };

inline Mode mode_from_string(const std::string& s) {
  if (s == "joint") return Mode::Joint;
  if (s == "reptile") return Mode::Reptile;
  throw Error("malformed_config", "training mode must be joint or reptile, got '" + s + "'");
}

struct TrainConfig {
  std::size_t epochs = 100;
  double lr = 1e-4;
  double weight_decay = 5e-4;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  Mode mode = Mode::Joint;
  std::size_t reptile_inner_steps = 5;
  double reptile_eps = 0.1;
  unsigned threads = 1;

  void validate() const {
    FSEL_CHECK(lr > 0.0, "malformed_config", "lr must be positive");
    FSEL_CHECK(batch_size >= 1, "malformed_config", "batch_size must be positive");
    FSEL_CHECK(weight_decay >= 0.0, "malformed_config", "weight_decay must be non-negative");
    FSEL_CHECK(reptile_eps >= 0.0 && reptile_eps <= 1.0, "malformed_config", "reptile_eps must lie in [0,1]");
  }
};

/// One supervised example with the class weight of the dataset it came from.
struct Sample {
  GrayImage image;
  BinaryMask mask;
  double w = 1.0;
};

struct LabeledDataset {
  std::string id;
  std::vector<GrayImage> images;
  std::vector<BinaryMask> masks;
};

struct EpochLoss {
  std::size_t epoch = 0;
  double loss = 0.0;
};

using TrainingLog = std::vector<EpochLoss>;

/// Mean loss and mean gradient over a batch. Per-sample gradients may be
/// computed concurrently; the reduction runs in batch order.
inline nn::SampleGradient batch_gradient(const nn::ModelParams& params, const std::vector<Sample>& samples,
                                         const std::vector<std::size_t>& batch, unsigned threads) {
  std::vector<nn::SampleGradient> per(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t i) {
    const auto& s = samples[batch[i]];
    per[i] = nn::loss_and_gradient(params, s.image, s.mask, s.w);
  });
  nn::SampleGradient total{0.0, nn::zero_gradients(params)};
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& sg : per) {
    total.loss += sg.loss * inv;
    for (std::size_t t = 0; t < total.grads.size(); ++t)
      for (std::size_t k = 0; k < total.grads[t].numel(); ++k) total.grads[t].data[k] += sg.grads[t].data[k] * inv;
  }
  return total;
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
  return idx;
}

/// Mini-batch Adam over `samples` for cfg.epochs epochs, seeded shuffling.
/// The logged loss of an epoch is the mean pre-update batch loss.
inline nn::ModelParams train(nn::ModelParams params, const std::vector<Sample>& samples, const TrainConfig& cfg,
                             TrainingLog* log = nullptr) {
  cfg.validate();
  if (cfg.epochs == 0) return params;
  FSEL_CHECK(!samples.empty(), "empty_dataset", "training set is empty");
  auto state = nn::AdamState::for_params(params, cfg.lr, cfg.weight_decay);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = shuffled_indices(samples.size(), hash_combine(cfg.seed, epoch));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::vector<std::size_t> batch(order.begin() + static_cast<long>(start),
                                           order.begin() + static_cast<long>(std::min(order.size(), start + cfg.batch_size)));
      auto bg = batch_gradient(params, samples, batch, cfg.threads);
      FSEL_CHECK(std::isfinite(bg.loss), "non_finite_loss", "training loss became non-finite");
      nn::adam_step(params, bg.grads, state);
      loss_sum += bg.loss;
      ++batches;
    }
    if (log) log->push_back({epoch, loss_sum / static_cast<double>(batches)});
  }
  return params;
}

inline std::vector<Sample> to_samples(const LabeledDataset& ds, double w) {
  FSEL_CHECK(ds.images.size() == ds.masks.size(), "shape_mismatch", ds.id + ": image/mask count mismatch");
  std::vector<Sample> out;
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    require_same_shape(ds.images[i], ds.masks[i], "training sample");
    out.push_back({ds.images[i], ds.masks[i], w});
  }
  return out;
}

/// Mean weighted BCE over a sample set at fixed parameters.
inline double dataset_loss(const nn::ModelParams& params, const std::vector<Sample>& samples, unsigned threads = 1) {
  std::vector<double> losses(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    losses[i] = nn::sample_loss(params, samples[i].image, samples[i].mask, samples[i].w);
  });
  double s = 0.0;
  for (double l : losses) s += l;
  return s / static_cast<double>(samples.size());
}

/// Source pretraining from `init`. Joint mode minimizes the mean per-sample
/// loss over the union of sources (each with its own class weight). Reptile
/// mode runs cfg.epochs x |sources| meta-iterations: pick a source, take
/// reptile_inner_steps Adam steps on it, then move toward the adapted weights
/// by reptile_eps.
inline nn::ModelParams pretrain_sources(const std::vector<LabeledDataset>& sources, nn::ModelParams init,
                                        const TrainConfig& cfg,
                                        nn::WeightOrientation orient = nn::WeightOrientation::BgOverFg,
                                        TrainingLog* log = nullptr) {
  FSEL_CHECK(!sources.empty(), "empty_source", "pretraining needs at least one source dataset");
  std::vector<std::vector<Sample>> per_source;
  for (const auto& src : sources) {
    FSEL_CHECK(!src.images.empty(), "empty_source", "source dataset " + src.id + " has no labeled patches");
    per_source.push_back(to_samples(src, nn::class_weight_or_one(src.masks, orient)));
  }
  if (cfg.mode == Mode::Joint) {
    std::vector<Sample> all;
    for (auto& s : per_source) all.insert(all.end(), s.begin(), s.end());
    return train(std::move(init), all, cfg, log);
  }

  cfg.validate();
  nn::ModelParams theta = std::move(init);
  std::mt19937_64 rng(hash_combine(cfg.seed, 0x5EED));
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (std::size_t it = 0; it < sources.size(); ++it) {
      const auto& samples = per_source[rng() % per_source.size()];
      nn::ModelParams inner = theta;
      auto state = nn::AdamState::for_params(inner, cfg.lr, cfg.weight_decay);
      const auto order = shuffled_indices(samples.size(), rng());
      double inner_loss = 0.0;
      for (std::size_t step = 0; step < cfg.reptile_inner_steps; ++step) {
        std::vector<std::size_t> batch;
        for (std::size_t b = 0; b < cfg.batch_size; ++b)
          batch.push_back(order[(step * cfg.batch_size + b) % order.size()]);
        auto bg = batch_gradient(inner, samples, batch, cfg.threads);
        nn::adam_step(inner, bg.grads, state);
        inner_loss += bg.loss;
      }
      for (std::size_t t = 0; t < theta.weights.size(); ++t)
        for (std::size_t k = 0; k < theta.weights[t].numel(); ++k) {
          double& v = theta.weights[t].data[k];
          v += cfg.reptile_eps * (inner.weights[t].data[k] - v);
        }
      if (cfg.reptile_inner_steps) loss_sum += inner_loss / static_cast<double>(cfg.reptile_inner_steps);
    }
    if (log) log->push_back({epoch, loss_sum / static_cast<double>(sources.size())});
  }
  return theta;
}

/// Crops every image/pseudo-mask pair into the patch grid.
inline std::vector<Sample> pseudo_patches(const pseudolabel::PseudoLabeledSet& set, std::size_t patch_size,
                                          std::size_t patches_per_image, double w) {
  std::vector<Sample> out;
  for (const auto& it : set.items) {
    require_same_shape(it.image, it.mask, "pseudo-labeled item " + it.image_id);
    for (const auto& ref : imaging::extract_patches(it.image_id, it.image, patch_size, patches_per_image))
      out.push_back({crop(it.image, ref), crop(it.mask, ref), w});
  }
  return out;
}

/// Adapts the source model to the target's pseudo-labels.
inline nn::ModelParams fit_pseudo(const nn::ModelParams& theta, const pseudolabel::PseudoLabeledSet& set,
                                  std::size_t patch_size, std::size_t patches_per_image, const TrainConfig& cfg,
                                  nn::WeightOrientation orient = nn::WeightOrientation::BgOverFg,
                                  TrainingLog* log = nullptr) {
  FSEL_CHECK(!set.items.empty(), "empty_dataset", "pseudo-labeled set is empty");
  const double w = nn::class_weight_or_one(set.masks(), orient);
  return train(theta, pseudo_patches(set, patch_size, patches_per_image, w), cfg, log);
}

/// Fine-tunes on expert-labeled support patches.
inline nn::ModelParams finetune_support(const nn::ModelParams& theta_prime, const std::vector<GrayImage>& patches,
                                        const std::vector<BinaryMask>& masks, const TrainConfig& cfg,
                                        nn::WeightOrientation orient = nn::WeightOrientation::BgOverFg,
                                        TrainingLog* log = nullptr) {
  FSEL_CHECK(!patches.empty(), "empty_dataset", "support set is empty");
  const LabeledDataset support{"support", patches, masks};
  return train(theta_prime, to_samples(support, nn::class_weight_or_one(masks, orient)), cfg, log);
}

}  // namespace fsel::training
