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

#include <algorithm>
#include <numeric>
#include <random>

#include "fsel/imaging/filters.hpp"
#include "fsel/pseudolabel.hpp"
#include "test_util.hpp"

namespace fsel {
namespace {

using pseudolabel::NamedImage;

TEST(Pipeline, ConstantImages) {
  const auto bright = pseudolabel::generate_pipeline({{"a", GrayImage(8, 8, 0.9)}}, 0.5);
  for (auto v : bright.items[0].mask.pixels) EXPECT_EQ(v, 0);
  const auto dark = pseudolabel::generate_pipeline({{"b", GrayImage(8, 8, 0.1)}}, 0.5);
  for (auto v : dark.items[0].mask.pixels) EXPECT_EQ(v, 1);
  EXPECT_EQ(dark.gamma_used, 0.5);
  EXPECT_THROW(pseudolabel::generate_pipeline({{"c", GrayImage(2, 2, 0.1)}}, 1.5), Error);
}

TEST(Pipeline, DarkDiskRecovered) {
  GrayImage x(64, 64, 0.8);
  BinaryMask disk(64, 64, 0);
  for (std::size_t r = 0; r < 64; ++r)
    for (std::size_t c = 0; c < 64; ++c)
      if ((r - 30.0) * (r - 30.0) + (c - 28.0) * (c - 28.0) <= 144.0) {
        disk.at(r, c) = 1;
        x.at(r, c) = 0.2;
      }
  const auto set = pseudolabel::generate_pipeline({{"disk", x}}, 0.5);
  const auto& m = set.items[0].mask;
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_TRUE(!disk.pixels[i] || m.pixels[i]);
    inter += m.pixels[i] && disk.pixels[i];
    uni += m.pixels[i] || disk.pixels[i];
  }
  EXPECT_GE(static_cast<double>(inter) / static_cast<double>(uni), 0.8);
}

TEST(Pipeline, EqualsManualComposition) {
  std::vector<NamedImage> imgs;
  for (std::uint64_t s = 0; s < 10; ++s) imgs.push_back({"i" + std::to_string(s), testing::random_image(20, 30, s)});
  const auto set = pseudolabel::generate_pipeline(imgs, 0.35, 3);
  ASSERT_EQ(set.items.size(), imgs.size());
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    EXPECT_EQ(set.items[i].image_id, imgs[i].id);
    EXPECT_EQ(set.items[i].mask,
              imaging::dilate2x2(imaging::threshold(imaging::equalize(imgs[i].image), 0.35)));
  }
}

TEST(Pipeline, InversionComplementsThresholdStage) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto x = testing::random_image(16, 16, 300 + t);
    const double g = 0.1 + 0.8 * unit_double(rng());
    GrayImage inv(16, 16);
    bool near_boundary = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      inv.pixels[i] = 1.0 - x.pixels[i];
      near_boundary |= std::abs(x.pixels[i] - g) < 1e-9;
    }
    if (near_boundary) continue;
    const auto a = imaging::threshold(x, g), b = imaging::threshold(inv, 1.0 - g);
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NE(a.pixels[i], b.pixels[i]);
  }
}

TEST(KMeans, TwoValues) {
  GrayImage x(2, 3, {0.1, 0.9, 0.9, 0.1, 0.9, 0.1});
  EXPECT_EQ(pseudolabel::kmeans_mask(x).pixels, (std::vector<std::uint8_t>{1, 0, 0, 1, 0, 1}));
}

TEST(KMeans, ThreeValuesClusterAsHandRun) {
  GrayImage x(1, 3, {1.0, 0.0, 0.4});
  EXPECT_EQ(pseudolabel::kmeans_mask(x).pixels, (std::vector<std::uint8_t>{0, 1, 1}));
}

TEST(KMeans, OrderInvariantAndDarkerIsForeground) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 50; ++t) {
    auto x = testing::random_image(8, 8, 700 + t);
    const auto m = pseudolabel::kmeans_mask(x);
    std::vector<std::size_t> perm(x.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    GrayImage y(8, 8);
    for (std::size_t i = 0; i < perm.size(); ++i) y.pixels[i] = x.pixels[perm[i]];
    const auto my = pseudolabel::kmeans_mask(y);
    double max_fg = 0.0, min_bg = 1.0;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      ASSERT_EQ(my.pixels[i], m.pixels[perm[i]]);
      if (m.pixels[perm[i]]) max_fg = std::max(max_fg, x.pixels[perm[i]]);
      else min_bg = std::min(min_bg, x.pixels[perm[i]]);
    }
    EXPECT_LE(max_fg, min_bg);
  }
  // two distinct values: darker is always foreground regardless of counts
  GrayImage skew(1, 5, {0.7, 0.7, 0.7, 0.7, 0.3});
  EXPECT_EQ(pseudolabel::kmeans_mask(skew).pixels, (std::vector<std::uint8_t>{0, 0, 0, 0, 1}));
}

TEST(KMeans, ConstantImageRejected) {
  try {
    pseudolabel::generate_kmeans({{"flat", GrayImage(4, 4, 0.5)}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "constant_image");
  }
}

}  // namespace
}  // namespace fsel
