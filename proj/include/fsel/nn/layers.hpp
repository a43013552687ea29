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
#include <cstdint>
#include <random>
#include <vector>

#include "fsel/rng.hpp"
#include "fsel/tensor.hpp"

// Layer kernels over [C, H, W] activations. Backward passes accumulate
// parameter gradients into the supplied tensors.
namespace fsel::nn::kernels {

inline Tensor conv_forward(const Tensor& in, const Tensor& weight, const Tensor& bias) {
  const std::size_t ci = in.dim(0), h = in.dim(1), w = in.dim(2);
  const std::size_t co = weight.dim(0), k = weight.dim(2);
  const long pad = static_cast<long>(k / 2);
  const std::size_t hw = h * w;
  Tensor out({co, h, w});
  for (std::size_t o = 0; o < co; ++o) {
    double* dst = out.ptr() + o * hw;
    std::fill(dst, dst + hw, bias.data[o]);
    for (std::size_t i = 0; i < ci; ++i) {
      const double* src = in.ptr() + i * hw;
      const double* kern = weight.ptr() + (o * ci + i) * k * k;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const long dy = static_cast<long>(ky) - pad;
        const long y0 = std::max(0L, -dy), y1 = std::min<long>(h, static_cast<long>(h) - dy);
        for (std::size_t kx = 0; kx < k; ++kx) {
          const long dx = static_cast<long>(kx) - pad;
          const long x0 = std::max(0L, -dx), x1 = std::min<long>(w, static_cast<long>(w) - dx);
          const double wv = kern[ky * k + kx];
          for (long y = y0; y < y1; ++y) {
            double* orow = dst + y * w;
            const double* irow = src + (y + dy) * static_cast<long>(w) + dx;
            for (long x = x0; x < x1; ++x) orow[x] += wv * irow[x];
          }
        }
      }
    }
  }
  return out;
}

/// Returns the input gradient (skipped, empty, when need_input_grad is false).
inline Tensor conv_backward(const Tensor& in, const Tensor& weight, const Tensor& grad_out,
                            Tensor& grad_weight, Tensor& grad_bias, bool need_input_grad) {
  const std::size_t ci = in.dim(0), h = in.dim(1), w = in.dim(2);
  const std::size_t co = weight.dim(0), k = weight.dim(2);
  const long pad = static_cast<long>(k / 2);
  const std::size_t hw = h * w;
  Tensor grad_in;
  if (need_input_grad) grad_in = Tensor({ci, h, w});
  for (std::size_t o = 0; o < co; ++o) {
    const double* g = grad_out.ptr() + o * hw;
    double gb = 0.0;
    for (std::size_t p = 0; p < hw; ++p) gb += g[p];
    grad_bias.data[o] += gb;
    for (std::size_t i = 0; i < ci; ++i) {
      const double* src = in.ptr() + i * hw;
      const double* kern = weight.ptr() + (o * ci + i) * k * k;
      double* gkern = grad_weight.ptr() + (o * ci + i) * k * k;
      double* gsrc = need_input_grad ? grad_in.ptr() + i * hw : nullptr;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const long dy = static_cast<long>(ky) - pad;
        const long y0 = std::max(0L, -dy), y1 = std::min<long>(h, static_cast<long>(h) - dy);
        for (std::size_t kx = 0; kx < k; ++kx) {
          const long dx = static_cast<long>(kx) - pad;
          const long x0 = std::max(0L, -dx), x1 = std::min<long>(w, static_cast<long>(w) - dx);
          const double wv = kern[ky * k + kx];
          double acc = 0.0;
          for (long y = y0; y < y1; ++y) {
            const double* grow = g + y * w;
            const double* irow = src + (y + dy) * static_cast<long>(w) + dx;
            for (long x = x0; x < x1; ++x) acc += grow[x] * irow[x];
            if (gsrc) {
              double* girow = gsrc + (y + dy) * static_cast<long>(w) + dx;
              for (long x = x0; x < x1; ++x) girow[x] += wv * grow[x];
            }
          }
          gkern[ky * k + kx] += acc;
        }
      }
    }
  }
  return grad_in;
}

inline Tensor relu_forward(const Tensor& in) {
  Tensor out = in;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

inline Tensor relu_backward(const Tensor& out, const Tensor& grad_out) {
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.numel(); ++i)
    if (!(out.data[i] > 0.0)) g.data[i] = 0.0;
  return g;
}

/// 2x2/stride-2 max pooling; argmax holds the winning offset (0..3, first max wins).
inline Tensor maxpool_forward(const Tensor& in, std::vector<std::uint8_t>& argmax) {
  const std::size_t c = in.dim(0), h = in.dim(1), w = in.dim(2);
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor out({c, oh, ow});
  argmax.assign(c * oh * ow, 0);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        const double* base = in.ptr() + ch * h * w + 2 * y * w + 2 * x;
        const double cand[4] = {base[0], base[1], base[w], base[w + 1]};
        std::uint8_t best = 0;
        for (std::uint8_t j = 1; j < 4; ++j)
          if (cand[j] > cand[best]) best = j;
        const std::size_t o = (ch * oh + y) * ow + x;
        out.data[o] = cand[best];
        argmax[o] = best;
      }
  return out;
}

inline Tensor maxpool_backward(const Tensor& grad_out, const std::vector<std::uint8_t>& argmax,
                               std::size_t h, std::size_t w) {
  const std::size_t c = grad_out.dim(0), oh = grad_out.dim(1), ow = grad_out.dim(2);
  Tensor g({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x) {
        const std::size_t o = (ch * oh + y) * ow + x;
        const std::size_t dy = argmax[o] / 2, dx = argmax[o] % 2;
        g.data[ch * h * w + (2 * y + dy) * w + 2 * x + dx] += grad_out.data[o];
      }
  return g;
}

inline Tensor upsample_forward(const Tensor& in) {
  const std::size_t c = in.dim(0), h = in.dim(1), w = in.dim(2);
  Tensor out({c, 2 * h, 2 * w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < 2 * h; ++y)
      for (std::size_t x = 0; x < 2 * w; ++x)
        out.data[(ch * 2 * h + y) * 2 * w + x] = in.data[(ch * h + y / 2) * w + x / 2];
  return out;
}

inline Tensor upsample_backward(const Tensor& grad_out) {
  const std::size_t c = grad_out.dim(0), h = grad_out.dim(1) / 2, w = grad_out.dim(2) / 2;
  Tensor g({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < 2 * h; ++y)
      for (std::size_t x = 0; x < 2 * w; ++x)
        g.data[(ch * h + y / 2) * w + x / 2] += grad_out.data[(ch * 2 * h + y) * 2 * w + x];
  return g;
}

/// Inverted dropout. Element i (row-major [C,H,W]) is kept iff the i-th draw
/// u_i = unit_double(mt19937_64(seed)()) satisfies u_i >= p; kept values are
/// scaled by 1/(1-p).
inline Tensor dropout_forward(const Tensor& in, double p, std::uint64_t seed,
                              std::vector<std::uint8_t>& keep) {
  Tensor out = in;
  keep.assign(in.numel(), 1);
  if (p <= 0.0) return out;
  std::mt19937_64 rng(seed);
  const double scale = p < 1.0 ? 1.0 / (1.0 - p) : 0.0;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    keep[i] = unit_double(rng()) >= p;
    out.data[i] = keep[i] ? out.data[i] * scale : 0.0;
  }
  return out;
}

inline Tensor dropout_backward(const Tensor& grad_out, double p, const std::vector<std::uint8_t>& keep) {
  Tensor g = grad_out;
  if (p <= 0.0) return g;
  const double scale = p < 1.0 ? 1.0 / (1.0 - p) : 0.0;
  for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] = keep[i] ? g.data[i] * scale : 0.0;
  return g;
}

}  // namespace fsel::nn::kernels
