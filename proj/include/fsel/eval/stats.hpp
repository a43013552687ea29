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
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "fsel/error.hpp"

namespace fsel::eval {

struct RunResult {
  std::string target;
  std::string scorer;
  std::size_t shots = 0;
  std::uint64_t split_seed = 0;
  double miou = 0.0;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1)
  std::size_t n = 0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
  FSEL_CHECK(!v.empty(), "empty_group", "mean/std of an empty group");
  FSEL_CHECK(v.size() >= 2, "insufficient_samples", "standard deviation needs at least two values");
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0)), v.size()};
}

struct GroupKey {
  std::string target;
  std::string scorer;
  std::size_t shots = 0;
  auto operator<=>(const GroupKey&) const = default;
};

/// Mean and sample std of mIoU per (target, scorer, shots).
inline std::map<GroupKey, MeanStd> aggregate(const std::vector<RunResult>& results) {
  std::map<GroupKey, std::vector<double>> groups;
  for (const auto& r : results) groups[{r.target, r.scorer, r.shots}].push_back(r.miou);
  FSEL_CHECK(!groups.empty(), "empty_group", "no results to aggregate");
  std::map<GroupKey, MeanStd> out;
  for (const auto& [k, v] : groups) {
    try {
      out[k] = mean_std(v);
    } catch (const Error& e) {
      throw e.with_context(k.target + "/" + k.scorer + "/" + std::to_string(k.shots) + "-shot");
    }
  }
  return out;
}

struct WilcoxonResult {
  std::size_t n = 0;        // non-zero differences
  double statistic = 0.0;   // W+ : rank sum of positive differences
  double p_value = 1.0;
  bool exact = true;
};

inline constexpr std::size_t kWilcoxonExactMax = 20;

/// One-sided Wilcoxon signed-rank test of H_a: ours > baseline. Zero
/// differences are dropped and tied magnitudes get average ranks. Exact for
/// n <= 20 (the null distribution over all 2^n sign flips is counted with a
/// rank-sum table on doubled ranks); otherwise the normal approximation with
/// tie and continuity correction.
inline WilcoxonResult wilcoxon_one_sided(const std::vector<double>& baseline, const std::vector<double>& ours) {
  FSEL_CHECK(baseline.size() == ours.size() && !baseline.empty(), "shape_mismatch",
             "wilcoxon needs equally many (>= 1) paired samples");
  std::vector<double> d;
  for (std::size_t i = 0; i < ours.size(); ++i)
    if (ours[i] - baseline[i] != 0.0) d.push_back(ours[i] - baseline[i]);
  FSEL_CHECK(!d.empty(), "all_differences_zero", "wilcoxon: every paired difference is zero");
  const std::size_t n = d.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<std::uint64_t> rank2(n);  // doubled average ranks
  std::vector<std::size_t> tie_sizes;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && std::abs(d[order[j]]) == std::abs(d[order[i]])) ++j;
    for (std::size_t k = i; k < j; ++k) rank2[order[k]] = i + j + 1;  // (i+1 + j) = 2 * mean rank
    tie_sizes.push_back(j - i);
    i = j;
  }
  std::uint64_t w2 = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (d[i] > 0) w2 += rank2[i];

  WilcoxonResult res;
  res.n = n;
  res.statistic = static_cast<double>(w2) / 2.0;
  if (n <= kWilcoxonExactMax) {
    const std::uint64_t total2 = std::accumulate(rank2.begin(), rank2.end(), std::uint64_t{0});
    std::vector<std::uint64_t> count(total2 + 1, 0);
    count[0] = 1;
    for (auto r : rank2)
      for (std::uint64_t s = total2; s >= r; --s) {
        count[s] += count[s - r];
        if (s == r) break;
      }
    std::uint64_t hits = 0;
    for (std::uint64_t s = w2; s <= total2; ++s) hits += count[s];
    res.p_value = static_cast<double>(hits) / static_cast<double>(std::uint64_t{1} << n);
    res.exact = true;
  } else {
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
    for (auto t : tie_sizes) var -= (static_cast<double>(t) * t * t - static_cast<double>(t)) / 48.0;
    const double z = (res.statistic - mean - 0.5) / std::sqrt(var);
    res.p_value = 0.5 * std::erfc(z / std::sqrt(2.0));
    res.exact = false;
  }
  return res;
}

}  // namespace fsel::eval
