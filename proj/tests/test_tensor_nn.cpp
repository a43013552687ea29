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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "fsel/nn/adam.hpp"
#include "fsel/nn/checkpoint.hpp"
#include "fsel/nn/gradcheck.hpp"
#include "fsel/nn/network.hpp"
#include "test_util.hpp"

namespace fsel {
namespace {

using nn::LayerKind;
using testing::random_image;
using testing::random_mask;
using testing::tiny_architecture;

// Straight-line re-implementation of the layer stack on nested vectors.
// Shares no code with the tensor kernels; dropout draws are replayed from
// mt19937_64 in [C,H,W] order.
using Planes = std::vector<std::vector<std::vector<double>>>;

Planes oracle_forward(const nn::ModelParams& p, const GrayImage& img, bool dropout, std::uint64_t seed) {
  Planes x(1, std::vector<std::vector<double>>(img.height, std::vector<double>(img.width)));
  for (std::size_t r = 0; r < img.height; ++r)
    for (std::size_t c = 0; c < img.width; ++c) x[0][r][c] = img.at(r, c);
  std::size_t widx = 0;
  for (const auto& l : p.arch) {
    const std::size_t C = x.size(), H = x[0].size(), W = x[0][0].size();
    if (l.kind == LayerKind::Conv) {
      const auto& wt = p.weights[widx];
      const auto& b = p.weights[widx + 1];
      widx += 2;
      const long k = l.kernel, pad = k / 2;
      Planes y(l.out, std::vector<std::vector<double>>(H, std::vector<double>(W)));
      for (std::size_t o = 0; o < l.out; ++o)
        for (long r = 0; r < static_cast<long>(H); ++r)
          for (long c = 0; c < static_cast<long>(W); ++c) {
            double s = b.data[o];
            for (std::size_t i = 0; i < C; ++i)
              for (long ky = 0; ky < k; ++ky)
                for (long kx = 0; kx < k; ++kx) {
                  const long rr = r + ky - pad, cc = c + kx - pad;
                  if (rr < 0 || cc < 0 || rr >= static_cast<long>(H) || cc >= static_cast<long>(W)) continue;
                  s += wt.data[((o * C + i) * k + ky) * k + kx] * x[i][rr][cc];
                }
            y[o][r][c] = s;
          }
      x = std::move(y);
    } else if (l.kind == LayerKind::ReLU) {
      for (auto& pl : x)
        for (auto& row : pl)
          for (auto& v : row) v = std::max(0.0, v);
    } else if (l.kind == LayerKind::MaxPool2) {
      Planes y(C, std::vector<std::vector<double>>(H / 2, std::vector<double>(W / 2)));
      for (std::size_t ch = 0; ch < C; ++ch)
        for (std::size_t r = 0; r < H / 2; ++r)
          for (std::size_t c = 0; c < W / 2; ++c)
            y[ch][r][c] = std::max({x[ch][2 * r][2 * c], x[ch][2 * r][2 * c + 1], x[ch][2 * r + 1][2 * c],
                                    x[ch][2 * r + 1][2 * c + 1]});
      x = std::move(y);
    } else if (l.kind == LayerKind::Upsample2) {
      Planes y(C, std::vector<std::vector<double>>(2 * H, std::vector<double>(2 * W)));
      for (std::size_t ch = 0; ch < C; ++ch)
        for (std::size_t r = 0; r < 2 * H; ++r)
          for (std::size_t c = 0; c < 2 * W; ++c) y[ch][r][c] = x[ch][r / 2][c / 2];
      x = std::move(y);
    } else if (l.kind == LayerKind::Dropout && dropout && p.dropout_p > 0.0) {
      std::mt19937_64 rng(seed);
      for (auto& pl : x)
        for (auto& row : pl)
          for (auto& v : row) {
            const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            v = u >= p.dropout_p ? v / (1.0 - p.dropout_p) : 0.0;
          }
    }
  }
  return x;
}

TEST(Forward, ZeroWeightsGiveHalfEverywhere) {
  const auto params = nn::zero_params(nn::fcrn_architecture(4, 8, 8), 0.5);
  const auto pred = nn::forward(params, random_image(16, 16, 1));
  for (double v : pred.pixels) EXPECT_EQ(v, 0.5);
}

TEST(Forward, DeterministicWithoutDropout) {
  const auto params = nn::init_params(tiny_architecture(), 0.5, 7);
  const auto img = random_image(16, 16, 2);
  EXPECT_EQ(nn::forward(params, img), nn::forward(params, img));
}

TEST(Forward, MatchesScalarOracleWithDropout) {
  const auto params = nn::init_params(nn::fcrn_architecture(), 0.5, 11);
  const auto img = random_image(64, 64, 3);
  const std::uint64_t seed = 1234;
  const auto pred = nn::forward(params, img, true, seed);
  const auto logits = oracle_forward(params, img, true, seed);
  double worst = 0.0;
  for (std::size_t r = 0; r < 64; ++r)
    for (std::size_t c = 0; c < 64; ++c) {
      const double z = logits[0][r][c];
      const double s = std::clamp(1.0 / (1.0 + std::exp(-z)), 1e-7, 1.0 - 1e-7);
      worst = std::max(worst, std::abs(s - pred.at(r, c)));
    }
  EXPECT_LE(worst, 1e-9);
  // dropout actually fired: a different seed gives a different map
  EXPECT_NE(pred, nn::forward(params, img, true, seed + 1));
}

TEST(Forward, OutputRangeAndZeroDropoutInvariant) {
  auto params = nn::init_params(tiny_architecture(), 0.0, 5);
  for (auto& t : params.weights)
    for (auto& v : t.data) v *= 40.0;  // push logits into saturation
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto img = random_image(16, 16, 100 + s);
    const auto a = nn::forward(params, img);
    for (double v : a.pixels) {
      EXPECT_GE(v, 1e-7);
      EXPECT_LE(v, 1.0 - 1e-7);
    }
    EXPECT_EQ(a, nn::forward(params, img, true, s));
  }
}

TEST(Forward, Errors) {
  auto params = nn::init_params(tiny_architecture(), 0.5, 5);
  try {
    nn::forward(params, random_image(18, 16, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "dimension_mismatch");
  }
  try {
    nn::forward(params, random_image(16, 16, 1), true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "missing_seed");
  }
  params.weights[2].data[0] = std::nan("");
  try {
    nn::forward(params, random_image(16, 16, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "non_finite_weights");
  }
}

TEST(Architecture, RejectsChannelMismatch) {
  auto arch = nn::fcrn_architecture(4, 8, 8);
  arch[3].in = 5;
  EXPECT_THROW(nn::validate_architecture(arch), Error);
  EXPECT_EQ(nn::validate_architecture(nn::fcrn_architecture()), 4u);
  EXPECT_THROW(nn::zero_params(nn::fcrn_architecture(), 1.5), Error);
}

TEST(WeightedBce, SinglePixelLn2) {
  PredictionMap p(1, 1, 0.5);
  BinaryMask y(1, 1, 1);
  EXPECT_NEAR(nn::weighted_bce(p, y, 1.0).loss, std::log(2.0), 1e-15);
}

TEST(WeightedBce, PerfectPredictionNearZero) {
  const auto y = random_mask(8, 8, 4);
  PredictionMap p(8, 8);
  for (std::size_t i = 0; i < p.size(); ++i) p.pixels[i] = y.pixels[i] ? 1.0 - 1e-7 : 1e-7;
  for (double w : {0.5, 1.0, 7.0}) EXPECT_LE(nn::weighted_bce(p, y, w).loss, 2e-7 * std::max(w, 1.0));
}

TEST(WeightedBce, GradientMatchesFiniteDifferences) {
  const auto y = random_mask(8, 8, 5);
  PredictionMap p(8, 8);
  std::mt19937_64 rng(6);
  for (auto& v : p.pixels) v = 0.05 + 0.9 * unit_double(rng());
  const double w = 3.5, h = 1e-6;
  const auto lg = nn::weighted_bce(p, y, w);
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto up = p, down = p;
    up.pixels[i] += h;
    down.pixels[i] -= h;
    const double fd = (nn::weighted_bce(up, y, w).loss - nn::weighted_bce(down, y, w).loss) / (2 * h);
    worst = std::max(worst, std::abs(lg.grad[i] - fd) / std::abs(fd));
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(WeightedBce, TranspositionInvariant) {
  const auto y = random_mask(6, 9, 8);
  PredictionMap p(6, 9);
  std::mt19937_64 rng(9);
  for (auto& v : p.pixels) v = 0.01 + 0.98 * unit_double(rng());
  PredictionMap pt(9, 6);
  BinaryMask yt(9, 6);
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 9; ++c) {
      pt.at(c, r) = p.at(r, c);
      yt.at(c, r) = y.at(r, c);
    }
  EXPECT_NEAR(nn::weighted_bce(p, y, 2.0).loss, nn::weighted_bce(pt, yt, 2.0).loss, 1e-14);
  EXPECT_THROW(nn::weighted_bce(pt, y, 1.0), Error);
}

TEST(ClassWeight, CountRatios) {
  BinaryMask m(2, 2, {1, 0, 0, 0});
  EXPECT_EQ(nn::class_weight(std::vector{m}), 3.0);
  EXPECT_EQ(nn::class_weight(std::vector{m}, nn::WeightOrientation::FgOverBg), 1.0 / 3.0);

  BinaryMask a(10, 10, 0), b(10, 40, 0);
  for (std::size_t i = 0; i < 50; ++i) a.pixels[i] = 1;
  for (std::size_t i = 0; i < 50; ++i) b.pixels[i * 8] = 1;
  EXPECT_EQ(nn::class_weight(std::vector{a, b}), 4.0);

  EXPECT_EQ(nn::class_weight(std::vector{BinaryMask(3, 3, 1)}), 1.0);
  try {
    nn::class_weight(std::vector{BinaryMask(3, 3, 0)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "degenerate_dataset");
  }
  EXPECT_EQ(nn::class_weight_or_one(std::vector{BinaryMask(3, 3, 0)}), 1.0);
}

nn::ModelParams scalar_model() {
  auto p = nn::zero_params({nn::conv(1, 1, 1)}, 0.0);
  return p;
}

TEST(Adam, ClosedFormFirstStep) {
  auto p = scalar_model();
  const double lr = 0.01;
  auto st = nn::AdamState::for_params(p, lr, 0.0);
  auto g = nn::zero_gradients(p);
  g[0].data[0] = 1.0;
  nn::adam_step(p, g, st);
  EXPECT_EQ(st.step, 1u);
  EXPECT_NEAR(p.weights[0].data[0], -lr / (1.0 + 1e-8), 1e-18);
  EXPECT_EQ(p.weights[1].data[0], 0.0);
}

TEST(Adam, ZeroGradientLeavesParams) {
  auto p = nn::init_params(tiny_architecture(), 0.5, 3);
  const auto before = p;
  auto st = nn::AdamState::for_params(p, 1e-3, 0.0);
  for (int i = 0; i < 3; ++i) nn::adam_step(p, nn::zero_gradients(p), st);
  EXPECT_EQ(p, before);
}

TEST(Adam, DecoupledDecayScalesParams) {
  auto p = scalar_model();
  p.weights[0].data[0] = 2.0;
  auto st = nn::AdamState::for_params(p, 0.1, 0.5);
  nn::adam_step(p, nn::zero_gradients(p), st);
  EXPECT_DOUBLE_EQ(p.weights[0].data[0], 2.0 * (1.0 - 0.05));
}

TEST(Adam, RejectsNonFiniteGradient) {
  auto p = scalar_model();
  auto st = nn::AdamState::for_params(p, 0.1, 0.0);
  auto g = nn::zero_gradients(p);
  g[1].data[0] = INFINITY;
  try {
    nn::adam_step(p, g, st);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "non_finite_gradient");
  }
}

std::pair<std::vector<GrayImage>, std::vector<BinaryMask>> learnable_batch() {
  // dark disks on a noisy bright background
  std::vector<GrayImage> xs;
  std::vector<BinaryMask> ys;
  for (std::uint64_t s = 0; s < 4; ++s) {
    auto x = random_image(16, 16, 40 + s);
    BinaryMask y(16, 16);
    const double cr = 5.0 + 2.0 * s, cc = 10.0 - s;
    for (std::size_t r = 0; r < 16; ++r)
      for (std::size_t c = 0; c < 16; ++c) {
        const bool in = (r - cr) * (r - cr) + (c - cc) * (c - cc) <= 12.0;
        y.at(r, c) = in;
        x.at(r, c) = in ? 0.2 * x.at(r, c) : 0.6 + 0.4 * x.at(r, c);
      }
    xs.push_back(std::move(x));
    ys.push_back(std::move(y));
  }
  return {xs, ys};
}

double batch_loss(const nn::ModelParams& p, const std::vector<GrayImage>& xs, const std::vector<BinaryMask>& ys) {
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) s += nn::sample_loss(p, xs[i], ys[i], 1.5);
  return s / static_cast<double>(xs.size());
}

nn::ModelParams train_steps(std::uint64_t seed, int steps, double* first, double* last) {
  auto [xs, ys] = learnable_batch();
  auto p = nn::init_params(tiny_architecture(), 0.5, seed);
  auto st = nn::AdamState::for_params(p, 1e-2, 5e-4);
  if (first) *first = batch_loss(p, xs, ys);
  for (int s = 0; s < steps; ++s) {
    auto g = nn::zero_gradients(p);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      auto sg = nn::loss_and_gradient(p, xs[i], ys[i], 1.5);
      for (std::size_t t = 0; t < g.size(); ++t)
        for (std::size_t k = 0; k < g[t].numel(); ++k) g[t].data[k] += sg.grads[t].data[k] / xs.size();
    }
    nn::adam_step(p, g, st);
  }
  if (last) *last = batch_loss(p, xs, ys);
  return p;
}

TEST(Adam, TrainabilitySmoke) {
  double first = 0, last = 0;
  train_steps(21, 100, &first, &last);
  EXPECT_LE(last, 0.5 * first) << "first=" << first << " last=" << last;
}

TEST(Adam, IdenticalRunsBitIdentical) {
  EXPECT_EQ(train_steps(5, 10, nullptr, nullptr), train_steps(5, 10, nullptr, nullptr));
}

TEST(GradCheck, TinyNetwork) {
  const auto params = testing::with_random_biases(nn::init_params(tiny_architecture(), 0.5, 13), 2);
  EXPECT_LE(params.parameter_count(), 5000u);
  const auto img = random_image(16, 16, 14);
  const auto y = random_mask(16, 16, 15, 0.3);
  const auto r = nn::grad_check(params, img, y, 2.0, {.samples = 200, .step = 1e-5, .seed = 1});
  EXPECT_EQ(r.checked, 200u);
  EXPECT_LE(r.max_rel_error, 1e-3);
}

TEST(GradCheck, ProbesAcrossReluKinksAreSkipped) {
  // zero biases leave dead regions exactly on the ReLU kink
  const auto params = nn::init_params(tiny_architecture(), 0.5, 11);
  const auto r = nn::grad_check(params, random_image(16, 16, 12), random_mask(16, 16, 13, 0.3), 1.7);
  EXPECT_GT(r.skipped, 0u);
  EXPECT_EQ(r.checked, 200u);
  EXPECT_LE(r.max_rel_error, 1e-3);
}

TEST(GradCheck, SingleAffineLayerIsNearExact) {
  auto params = nn::init_params({nn::conv(1, 1, 1)}, 0.0, 3);
  params.weights[1].data[0] = -0.3;
  const auto img = random_image(8, 8, 16);
  const auto y = random_mask(8, 8, 17);
  EXPECT_LE(nn::grad_check(params, img, y, 1.7).max_rel_error, 1e-7);
}

TEST(GradCheck, ZeroInputZeroTargetFinite) {
  const auto params = nn::init_params(tiny_architecture(), 0.5, 13);
  const auto r = nn::grad_check(params, GrayImage(16, 16, 0.0), BinaryMask(16, 16, 0), 1.0);
  EXPECT_TRUE(std::isfinite(r.max_rel_error));
}

TEST(Checkpoint, RoundTripAndHeader) {
  const auto params = nn::init_params(tiny_architecture(), 0.25, 99);
  std::stringstream ss;
  nn::write_checkpoint(ss, params);
  const std::string bytes = ss.str();
  ASSERT_GE(bytes.size(), 16u);
  EXPECT_EQ(bytes.substr(0, 8), "FSELNET1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 1);  // version, little-endian
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), params.arch.size());
  EXPECT_EQ(nn::read_checkpoint(ss), params);

  std::stringstream bad("NOTMAGIC");
  EXPECT_THROW(nn::read_checkpoint(bad), Error);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(nn::read_checkpoint(truncated), Error);
}

}  // namespace
}  // namespace fsel
