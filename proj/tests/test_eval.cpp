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

#include <random>
#include <set>

#include "fsel/eval/metrics.hpp"
#include "fsel/eval/splits.hpp"
#include "fsel/eval/stats.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace fsel {
namespace {

using testing::random_mask;

double set_iou(const BinaryMask& a, const BinaryMask& b) {
  std::set<std::size_t> sa, sb, inter, uni;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.pixels[i]) sa.insert(i);
    if (b.pixels[i]) sb.insert(i);
  }
  std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(inter, inter.end()));
  std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::inserter(uni, uni.end()));
  return uni.empty() ? 1.0 : static_cast<double>(inter.size()) / uni.size();
}

BinaryMask invert(BinaryMask m) {
  for (auto& v : m.pixels) v = !v;
  return m;
}

TEST(Miou, HandCases) {
  BinaryMask gt(2, 2), pred(2, 2);
  gt.pixels = {1, 1, 0, 0};
  pred.pixels = {1, 0, 1, 0};
  EXPECT_DOUBLE_EQ(eval::mask_iou(pred, gt), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(eval::mask_iou(pred, gt, eval::MiouMode::FgBgMean), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(eval::mask_iou(BinaryMask(3, 3), BinaryMask(3, 3)), 1.0);
  EXPECT_DOUBLE_EQ(eval::mask_iou(gt, gt), 1.0);
  EXPECT_DOUBLE_EQ(eval::mask_iou(invert(gt), gt), 0.0);
}

TEST(Miou, MatchesSetOracle) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const double density = (s % 5) / 4.0;
    const auto a = random_mask(9, 7, s, density), b = random_mask(9, 7, s + 1000, 0.4);
    EXPECT_DOUBLE_EQ(eval::mask_iou(a, b), set_iou(a, b));
    EXPECT_DOUBLE_EQ(eval::mask_iou(a, b, eval::MiouMode::FgBgMean),
                     0.5 * (set_iou(a, b) + set_iou(invert(a), invert(b))));
  }
}

TEST(Miou, ThresholdsProbabilities) {
  PredictionMap p(1, 3);
  p.pixels = {0.2, 0.5, 0.9};
  EXPECT_EQ(eval::binarize(p).pixels, (std::vector<std::uint8_t>{0, 0, 1}));
  BinaryMask gt(1, 3);
  gt.pixels = {0, 1, 1};
  EXPECT_DOUBLE_EQ(eval::miou(p, gt), 0.5);
  EXPECT_DOUBLE_EQ(eval::miou(p, gt, 0.4), 1.0);
  EXPECT_THROW(eval::miou(p, BinaryMask(3, 1)), Error);
  EXPECT_THROW(eval::miou_mode_from_string("dice"), Error);
}

std::map<std::string, std::vector<std::string>> toy_datasets() {
  std::map<std::string, std::vector<std::string>> ds;
  for (const char* d : {"a", "b", "c"})
    for (int i = 0; i < 9; ++i) ds[d].push_back(std::string(d) + std::to_string(i));
  return ds;
}

TEST(Splits, LeaveOneOutPartitions) {
  const auto ds = toy_datasets();
  const auto loo = eval::make_splits(ds, "b", 0.5, 10, 3);
  EXPECT_EQ(loo.sources, (std::vector<std::string>{"a", "c"}));
  ASSERT_EQ(loo.plans.size(), 10u);
  std::set<std::vector<std::string>> distinct;
  for (const auto& p : loo.plans) {
    EXPECT_EQ(p.pool_ids.size(), 5u);  // round(4.5) away from zero
    EXPECT_EQ(p.test_ids.size(), 4u);
    std::set<std::string> all(p.pool_ids.begin(), p.pool_ids.end());
    for (const auto& t : p.test_ids) EXPECT_TRUE(all.insert(t).second) << t;
    EXPECT_EQ(all, std::set<std::string>(ds.at("b").begin(), ds.at("b").end()));
    distinct.insert(p.pool_ids);
  }
  EXPECT_GT(distinct.size(), 5u);
  EXPECT_EQ(loo.plans, eval::make_splits(ds, "b", 0.5, 10, 3).plans);
  EXPECT_EQ(loo.plans[4], eval::make_splits(ds, "b", 0.5, 1, 7).plans[0]);
}

TEST(Splits, UnknownTargetRaises) {
  try {
    eval::make_splits(toy_datasets(), "z", 0.5, 2, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "unknown_target");
  }
}

TEST(Aggregate, MeanAndSampleStd) {
  const auto ms = eval::mean_std({2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0});
  EXPECT_DOUBLE_EQ(ms.mean, 5.0);
  EXPECT_NEAR(ms.std, std::sqrt(32.0 / 7.0), 1e-12);
  std::vector<eval::RunResult> rs{{"t", "random", 1, 0, 0.2}, {"t", "random", 1, 1, 0.4},
                                  {"t", "consistency", 1, 0, 0.5}, {"t", "consistency", 1, 1, 0.5}};
  const auto agg = eval::aggregate(rs);
  ASSERT_EQ(agg.size(), 2u);
  EXPECT_DOUBLE_EQ((agg.at({"t", "random", 1}).mean), 0.3);
  EXPECT_DOUBLE_EQ((agg.at({"t", "consistency", 1}).std), 0.0);
}

TEST(Aggregate, DegenerateGroupsRaise) {
  try {
    eval::mean_std({0.4});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "insufficient_samples");
  }
  try {
    eval::aggregate({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "empty_group");
  }
}

TEST(Wilcoxon, AllPositiveTenPairs) {
  std::vector<double> base(10), ours(10);
  for (int i = 0; i < 10; ++i) {
    base[i] = 0.5;
    ours[i] = 0.5 + 0.01 * (i + 1);
  }
  const auto r = eval::wilcoxon_one_sided(base, ours);
  EXPECT_EQ(r.n, 10u);
  EXPECT_DOUBLE_EQ(r.statistic, 55.0);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0 / 1024.0);
  EXPECT_TRUE(r.exact);
  EXPECT_DOUBLE_EQ(eval::wilcoxon_one_sided(ours, base).p_value, 1.0);
}

TEST(Wilcoxon, ExactMatchesSignEnumeration) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng() % 14;
    std::vector<double> base(n), ours(n);
    for (std::size_t i = 0; i < n; ++i) {
      base[i] = 0.5;
      // coarse grid to force ties and zero differences
      ours[i] = 0.5 + 0.05 * (static_cast<double>(rng() % 7) - 3.0);
    }
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) any |= ours[i] != base[i];
    if (!any) continue;
    EXPECT_DOUBLE_EQ(eval::wilcoxon_one_sided(base, ours).p_value, oracle::wilcoxon_bruteforce(base, ours))
        << "trial " << trial;
  }
}

TEST(Wilcoxon, NormalApproximationTracksExactNearCutover) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.02, 0.05);
  std::vector<double> base(20, 0.5), ours(20);
  for (auto& v : ours) v = 0.5 + noise(rng);
  const auto exact = eval::wilcoxon_one_sided(base, ours);
  base.push_back(0.5);
  ours.push_back(0.5 + 1e-9);  // smallest rank; barely moves the statistic
  const auto approx = eval::wilcoxon_one_sided(base, ours);
  EXPECT_FALSE(approx.exact);
  EXPECT_NEAR(approx.p_value, exact.p_value, 0.03);
}

TEST(Wilcoxon, DegenerateInputsRaise) {
  try {
    eval::wilcoxon_one_sided({0.1, 0.2}, {0.1, 0.2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "all_differences_zero");
  }
  EXPECT_THROW(eval::wilcoxon_one_sided({0.1}, {0.1, 0.2}), Error);
}

}  // namespace
}  // namespace fsel
