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
#include <optional>
#include <string>
#include <vector>

#include "fsel/error.hpp"
#include "fsel/image.hpp"
#include "fsel/nn/layers.hpp"
#include "fsel/nn/loss.hpp"
#include "fsel/nn/model.hpp"
#include "fsel/rng.hpp"

namespace fsel::nn {

using Gradients = std::vector<Tensor>;

inline Gradients zero_gradients(const ModelParams& p) {
  Gradients g;
  g.reserve(p.weights.size());
  for (const auto& t : p.weights) g.emplace_back(t.shape, 0.0);
  return g;
}

/// Activations recorded during a forward pass for the backward sweep.
struct ForwardCache {
  std::vector<Tensor> acts;  // acts[0] = input, acts[i+1] = output of layer i
  std::vector<std::vector<std::uint8_t>> aux;  // pool argmax / dropout keep masks
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Seed for the i-th dropout layer of a forward pass.
inline std::uint64_t dropout_layer_seed(std::uint64_t seed, std::size_t dropout_index) {
  return dropout_index == 0 ? seed : hash_combine(seed, dropout_index);
}

inline Tensor image_tensor(const GrayImage& image) {
  return Tensor({1, image.height, image.width}, image.pixels);
}

/// Runs the layer stack and returns logits [1, H, W].
inline Tensor forward_logits(const ModelParams& params, const GrayImage& image, bool dropout_active,
                             std::optional<std::uint64_t> seed, ForwardCache* cache = nullptr) {
  const std::size_t factor = validate_architecture(params.arch);
  check_dropout_p(params.dropout_p);
  FSEL_CHECK(image.height > 0 && image.width > 0 && image.height % factor == 0 && image.width % factor == 0,
             "dimension_mismatch",
             "image " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                 " not divisible by down-sampling factor " + std::to_string(factor));
  FSEL_CHECK(!dropout_active || seed.has_value(), "missing_seed", "dropout_active requires an rng seed");
  FSEL_CHECK(params.weights.size() == weight_shapes(params.arch).size(), "invalid_architecture",
             "weight tensor count does not match architecture");
  FSEL_CHECK(params.all_finite(), "non_finite_weights", "model parameters contain NaN/Inf");

  Tensor x = image_tensor(image);
  if (cache) {
    cache->acts.clear();
    cache->aux.assign(params.arch.size(), {});
    cache->acts.push_back(x);
  }
  std::size_t widx = 0, drop_idx = 0;
  std::vector<std::uint8_t> scratch;
  for (std::size_t li = 0; li < params.arch.size(); ++li) {
    const auto& l = params.arch[li];
    auto& aux = cache ? cache->aux[li] : scratch;
    switch (l.kind) {
      case LayerKind::Conv:
        x = kernels::conv_forward(x, params.weights[widx], params.weights[widx + 1]);
        widx += 2;
        break;
      case LayerKind::ReLU: x = kernels::relu_forward(x); break;
      case LayerKind::MaxPool2: x = kernels::maxpool_forward(x, aux); break;
      case LayerKind::Upsample2: x = kernels::upsample_forward(x); break;
      case LayerKind::Dropout:
        if (dropout_active)
          x = kernels::dropout_forward(x, params.dropout_p, dropout_layer_seed(*seed, drop_idx), aux);
        else
          aux.assign(x.numel(), 1);
        ++drop_idx;
        break;
    }
    if (cache) cache->acts.push_back(x);
  }
  return x;
}

inline PredictionMap logits_to_prediction(const Tensor& logits) {
  PredictionMap out(logits.dim(1), logits.dim(2));
  for (std::size_t i = 0; i < out.size(); ++i) out.pixels[i] = clamp_prob(sigmoid(logits.data[i]));
  return out;
}

/// Foreground probability map, clamped to [1e-7, 1 - 1e-7].
inline PredictionMap forward(const ModelParams& params, const GrayImage& image, bool dropout_active = false,
                             std::optional<std::uint64_t> seed = std::nullopt) {
  return logits_to_prediction(forward_logits(params, image, dropout_active, seed));
}

/// Back-propagates d loss / d logits through the cached pass.
inline Gradients backward(const ModelParams& params, const ForwardCache& cache, Tensor grad,
                          bool dropout_active) {
  Gradients grads = zero_gradients(params);
  std::size_t widx = grads.size();
  for (std::size_t li = params.arch.size(); li-- > 0;) {
    const auto& l = params.arch[li];
    const Tensor& in = cache.acts[li];
    const Tensor& out = cache.acts[li + 1];
    switch (l.kind) {
      case LayerKind::Conv:
        widx -= 2;
        grad = kernels::conv_backward(in, params.weights[widx], grad, grads[widx], grads[widx + 1], li > 0);
        break;
      case LayerKind::ReLU: grad = kernels::relu_backward(out, grad); break;
      case LayerKind::MaxPool2: grad = kernels::maxpool_backward(grad, cache.aux[li], in.dim(1), in.dim(2)); break;
      case LayerKind::Upsample2: grad = kernels::upsample_backward(grad); break;
      case LayerKind::Dropout:
        if (dropout_active) grad = kernels::dropout_backward(grad, params.dropout_p, cache.aux[li]);
        break;
    }
  }
  return grads;
}

struct SampleGradient {
  double loss = 0.0;
  Gradients grads;
};

/// Weighted BCE of one image against its mask, with parameter gradients.
/// Pixels whose sigmoid output hits the clamp contribute no gradient.
inline SampleGradient loss_and_gradient(const ModelParams& params, const GrayImage& image,
                                        const BinaryMask& target, double w) {
  require_same_shape(image, target, "loss_and_gradient");
  ForwardCache cache;
  const Tensor logits = forward_logits(params, image, false, std::nullopt, &cache);
  PredictionMap pred(image.height, image.width);
  std::vector<double> dsig(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double s = sigmoid(logits.data[i]);
    pred.pixels[i] = clamp_prob(s);
    dsig[i] = (s > kProbEps && s < 1.0 - kProbEps) ? s * (1.0 - s) : 0.0;
  }
  const LossWithGrad lg = weighted_bce(pred, target, w);
  Tensor grad_logits(logits.shape);
  for (std::size_t i = 0; i < pred.size(); ++i) grad_logits.data[i] = lg.grad[i] * dsig[i];
  return {lg.loss, backward(params, cache, std::move(grad_logits), false)};
}

inline double sample_loss(const ModelParams& params, const GrayImage& image, const BinaryMask& target, double w) {
  return weighted_bce(forward(params, image), target, w).loss;
}

}  // namespace fsel::nn
