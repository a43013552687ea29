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
#include <utility>
#include <vector>

#include "fsel/nn/network.hpp"

namespace fsel::nn {

struct GradCheckOptions {
  std::size_t samples = 200;  // all parameters are checked when fewer exist
  double step = 1e-5;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // probes whose +/- step crossed a ReLU, max-pool or clamp switch
};

/// Which side of every non-smooth point the forward pass sits on: ReLU input
/// signs, max-pool winners, and whether each output is inside the clamp band.
inline std::vector<std::uint8_t> activation_pattern(const ModelParams& params, const GrayImage& image) {
  ForwardCache cache;
  const Tensor logits = forward_logits(params, image, false, std::nullopt, &cache);
  std::vector<std::uint8_t> out;
  for (std::size_t li = 0; li < params.arch.size(); ++li) {
    if (params.arch[li].kind == LayerKind::ReLU)
      for (double v : cache.acts[li].data) out.push_back(v > 0.0);
    else if (params.arch[li].kind == LayerKind::MaxPool2)
      out.insert(out.end(), cache.aux[li].begin(), cache.aux[li].end());
  }
  for (double z : logits.data) {
    const double s = sigmoid(z);
    out.push_back(s > kProbEps && s < 1.0 - kProbEps);
  }
  return out;
}

/// Max relative error between back-propagated gradients and central finite
/// differences of the weighted BCE, over a seeded random parameter sample.
/// A probe whose two evaluations straddle a kink has no valid central
/// difference; it is counted as skipped and the next parameter is drawn.
inline GradCheckResult grad_check(const ModelParams& params, const GrayImage& image, const BinaryMask& target,
                                  double w, const GradCheckOptions& opts = {}) {
  const SampleGradient analytic = loss_and_gradient(params, image, target, w);
  const auto base_pattern = activation_pattern(params, image);

  std::vector<std::pair<std::size_t, std::size_t>> index;  // (tensor, element)
  for (std::size_t t = 0; t < params.weights.size(); ++t)
    for (std::size_t i = 0; i < params.weights[t].numel(); ++i) index.emplace_back(t, i);
  std::mt19937_64 rng(opts.seed);
  for (std::size_t i = 0; i + 1 < index.size(); ++i) std::swap(index[i], index[i + rng() % (index.size() - i)]);

  ModelParams probe = params;
  GradCheckResult res;
  for (std::size_t s = 0; s < index.size() && res.checked < opts.samples; ++s) {
    const auto [t, i] = index[s];
    double& slot = probe.weights[t].data[i];
    const double orig = slot;
    slot = orig + opts.step;
    const double up = sample_loss(probe, image, target, w);
    const bool up_same = activation_pattern(probe, image) == base_pattern;
    slot = orig - opts.step;
    const double down = sample_loss(probe, image, target, w);
    const bool down_same = activation_pattern(probe, image) == base_pattern;
    slot = orig;
    if (!up_same || !down_same) {
      ++res.skipped;
      continue;
    }
    const double numeric = (up - down) / (2.0 * opts.step);
    const double err = std::abs(analytic.grads[t].data[i] - numeric) / std::max(1e-8, std::abs(numeric));
    res.max_rel_error = std::max(res.max_rel_error, err);
    ++res.checked;
  }
  return res;
}

}  // namespace fsel::nn
