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
#include <random>
#include <string>
#include <vector>

#include "fsel/error.hpp"
#include "fsel/rng.hpp"
#include "fsel/tensor.hpp"

namespace fsel::nn {

enum class LayerKind : std::uint32_t {
  Conv = 0,
  ReLU = 1,
  MaxPool2 = 2,
  Upsample2 = 3,
  Dropout = 4,
};

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::ReLU: return "relu";
    case LayerKind::MaxPool2: return "maxpool2";
    case LayerKind::Upsample2: return "upsample2";
    case LayerKind::Dropout: return "dropout";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(const std::string& s) {
  for (auto k : {LayerKind::Conv, LayerKind::ReLU, LayerKind::MaxPool2, LayerKind::Upsample2,
                 LayerKind::Dropout})
    if (s == to_string(k)) return k;
  throw Error("malformed_config", "unknown layer kind '" + s + "'");
}

/// One layer of a sequential network. Non-conv layers have kernel 0 and
/// in == out == the channel count flowing through them.
struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  std::uint32_t kernel = 0;
  std::uint32_t in = 0;
  std::uint32_t out = 0;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

using Architecture = std::vector<LayerSpec>;

inline LayerSpec conv(std::uint32_t k, std::uint32_t in, std::uint32_t out) {
  return {LayerKind::Conv, k, in, out};
}
inline LayerSpec passthrough(LayerKind kind, std::uint32_t ch) { return {kind, 0, ch, ch}; }

/// FCRN-shaped encoder/decoder: two pooling stages down, two nearest
/// upsamplings back, dropout before the final 1x1 projection.
inline Architecture fcrn_architecture(std::uint32_t c1 = 32, std::uint32_t c2 = 64, std::uint32_t c3 = 128) {
  using K = LayerKind;
  return {
      conv(3, 1, c1),         passthrough(K::ReLU, c1), passthrough(K::MaxPool2, c1),
      conv(3, c1, c2),        passthrough(K::ReLU, c2), passthrough(K::MaxPool2, c2),
      conv(3, c2, c3),        passthrough(K::ReLU, c3), passthrough(K::Upsample2, c3),
      conv(3, c3, c2),        passthrough(K::ReLU, c2), passthrough(K::Upsample2, c2),
      conv(3, c2, c1),        passthrough(K::ReLU, c1), passthrough(K::Dropout, c1),
      conv(1, c1, 1),
  };
}

/// Checks channel agreement and returns the total down-sampling factor.
inline std::size_t validate_architecture(const Architecture& arch) {
  FSEL_CHECK(!arch.empty(), "invalid_architecture", "architecture has no layers");
  FSEL_CHECK(arch.front().in == 1, "invalid_architecture", "first layer must take 1 channel");
  FSEL_CHECK(arch.back().kind == LayerKind::Conv && arch.back().out == 1, "invalid_architecture",
             "last layer must be a conv producing 1 channel");
  long scale = 0;
  long min_scale = 0;
  for (std::size_t i = 0; i < arch.size(); ++i) {
    const auto& l = arch[i];
    const std::string where = "layer " + std::to_string(i) + " (" + to_string(l.kind) + ")";
    FSEL_CHECK(l.in > 0 && l.out > 0, "invalid_architecture", where + ": zero channels");
    if (i > 0)
      FSEL_CHECK(arch[i - 1].out == l.in, "invalid_architecture", where + ": channel count mismatch");
    if (l.kind == LayerKind::Conv) {
      FSEL_CHECK(l.kernel % 2 == 1, "invalid_architecture", where + ": kernel must be odd");
    } else {
      FSEL_CHECK(l.in == l.out, "invalid_architecture", where + ": must preserve channels");
    }
    if (l.kind == LayerKind::MaxPool2) --scale;
    if (l.kind == LayerKind::Upsample2) ++scale;
    min_scale = std::min(min_scale, scale);
  }
  FSEL_CHECK(scale == 0, "invalid_architecture", "pooling and upsampling stages do not balance");
  return std::size_t{1} << static_cast<unsigned>(-min_scale);
}

/// Weights and architecture. Each conv layer owns two tensors, in order:
/// weight [out, in, k, k] and bias [out].
struct ModelParams {
  Architecture arch;
  std::vector<Tensor> weights;
  double dropout_p = 0.5;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : weights) n += t.numel();
    return n;
  }

  bool all_finite() const {
    for (const auto& t : weights)
      if (!t.all_finite()) return false;
    return true;
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

inline std::vector<std::vector<std::size_t>> weight_shapes(const Architecture& arch) {
  std::vector<std::vector<std::size_t>> shapes;
  for (const auto& l : arch) {
    if (l.kind != LayerKind::Conv) continue;
    shapes.push_back({l.out, l.in, l.kernel, l.kernel});
    shapes.push_back({l.out});
  }
  return shapes;
}

inline void check_dropout_p(double p) {
  FSEL_CHECK(p >= 0.0 && p <= 1.0, "invalid_architecture", "dropout_p must lie in [0,1]");
}

/// All weights and biases zero.
inline ModelParams zero_params(Architecture arch, double dropout_p = 0.5) {
  validate_architecture(arch);
  check_dropout_p(dropout_p);
  ModelParams p{std::move(arch), {}, dropout_p};
  for (auto& s : weight_shapes(p.arch)) p.weights.emplace_back(std::move(s), 0.0);
  return p;
}

/// He-uniform weights, zero biases.
inline ModelParams init_params(Architecture arch, double dropout_p, std::uint64_t seed) {
  ModelParams p = zero_params(std::move(arch), dropout_p);
  std::mt19937_64 rng(splitmix64(seed));
  for (std::size_t t = 0; t < p.weights.size(); t += 2) {
    auto& w = p.weights[t];
    const double fan_in = static_cast<double>(w.dim(1) * w.dim(2) * w.dim(3));
    const double bound = std::sqrt(6.0 / fan_in);
    for (double& v : w.data) v = bound * (2.0 * unit_double(rng()) - 1.0);
  }
  return p;
}

}  // namespace fsel::nn
