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
#include <random>
#include <string>
#include <vector>

#include "fsel/error.hpp"
#include "fsel/rng.hpp"

namespace fsel::eval {

struct SplitPlan {
  std::string target;
  std::vector<std::string> pool_ids;
  std::vector<std::string> test_ids;
  std::uint64_t split_seed = 0;

  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

struct LeaveOneOut {
  std::vector<std::string> sources;
  std::vector<SplitPlan> plans;
};

/// Leave-one-dataset-out: every dataset except the target becomes a source,
/// and the target's images are split n_repeats times into pool and test.
/// Plan k uses split_seed = seed + k; ids are listed in sorted order.
inline LeaveOneOut make_splits(const std::map<std::string, std::vector<std::string>>& datasets,
                               const std::string& target, double pool_fraction, std::size_t n_repeats,
                               std::uint64_t seed) {
  const auto it = datasets.find(target);
  FSEL_CHECK(it != datasets.end(), "unknown_target", "target dataset '" + target + "' not found");
  FSEL_CHECK(pool_fraction > 0.0 && pool_fraction < 1.0, "malformed_config", "pool_fraction must lie in (0,1)");
  FSEL_CHECK(it->second.size() >= 2, "malformed_config", "target needs at least two images to split");
  LeaveOneOut out;
  for (const auto& [id, _] : datasets)
    if (id != target) out.sources.push_back(id);

  std::vector<std::string> ids = it->second;
  std::sort(ids.begin(), ids.end());
  const std::size_t n = ids.size();
  const auto n_pool = static_cast<std::size_t>(
      std::clamp<long>(std::lround(pool_fraction * static_cast<double>(n)), 1, static_cast<long>(n) - 1));
  for (std::size_t k = 0; k < n_repeats; ++k) {
    SplitPlan plan{target, {}, {}, seed + k};
    auto order = ids;
    std::mt19937_64 rng(hash_combine(plan.split_seed, fnv1a(target)));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    plan.pool_ids.assign(order.begin(), order.begin() + static_cast<long>(n_pool));
    plan.test_ids.assign(order.begin() + static_cast<long>(n_pool), order.end());
    std::sort(plan.pool_ids.begin(), plan.pool_ids.end());
    std::sort(plan.test_ids.begin(), plan.test_ids.end());
    out.plans.push_back(std::move(plan));
  }
  return out;
}

}  // namespace fsel::eval
