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
#include <vector>

#include "fsel/error.hpp"
#include "fsel/nn/model.hpp"
#include "fsel/tensor.hpp"

namespace fsel::nn {

struct AdamState {
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  double lr = 1e-4;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const ModelParams& p, double lr, double weight_decay) {
    FSEL_CHECK(lr > 0.0, "malformed_config", "learning rate must be positive");
    AdamState s;
    s.lr = lr;
    s.weight_decay = weight_decay;
    for (const auto& t : p.weights) {
      s.m.emplace_back(t.shape, 0.0);
      s.v.emplace_back(t.shape, 0.0);
    }
    return s;
  }
};

/// Bias-corrected Adam step followed by decoupled decay p *= (1 - lr * wd).
inline void adam_step(ModelParams& params, const std::vector<Tensor>& grads, AdamState& state) {
  FSEL_CHECK(grads.size() == params.weights.size() && state.m.size() == params.weights.size(),
             "shape_mismatch", "adam_step: gradient/state count does not match parameters");
  for (std::size_t t = 0; t < grads.size(); ++t) {
    FSEL_CHECK(grads[t].shape == params.weights[t].shape, "shape_mismatch",
               "adam_step: gradient shape " + shape_string(grads[t].shape) + " vs parameter " +
                   shape_string(params.weights[t].shape));
    FSEL_CHECK(grads[t].all_finite(), "non_finite_gradient", "adam_step: gradient contains NaN/Inf");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  const double decay = 1.0 - state.lr * state.weight_decay;
  for (std::size_t k = 0; k < grads.size(); ++k) {
    auto& p = params.weights[k].data;
    auto& m = state.m[k].data;
    auto& v = state.v[k].data;
    const auto& g = grads[k].data;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
      if (state.weight_decay != 0.0) p[i] *= decay;
    }
  }
}

}  // namespace fsel::nn
