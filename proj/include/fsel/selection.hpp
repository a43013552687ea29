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
#include <string>
#include <vector>

#include "fsel/error.hpp"
#include "fsel/scoring.hpp"

namespace fsel::selection {

/// Annotation budget in patches: shots x patches per full image.
inline std::size_t budget_from_shots(std::size_t shots, std::size_t patches_per_image) {
  FSEL_CHECK(shots > 0 && patches_per_image > 0, "malformed_config", "shots and patches_per_image must be positive");
  return shots * patches_per_image;
}

struct SelectionResult {
  std::vector<scoring::ScoreRecord> chosen;  // descending score
  std::size_t budget = 0;
  scoring::Scorer scorer = scoring::Scorer::Consistency;
  double threshold_score = 0.0;  // score of the last admitted patch

  std::vector<PatchRef> patches() const {
    std::vector<PatchRef> out;
    out.reserve(chosen.size());
    for (const auto& r : chosen) out.push_back(r.patch);
    return out;
  }
};

/// Higher score first; ties by (image_id, row, col, size) ascending.
inline bool ranks_before(const scoring::ScoreRecord& a, const scoring::ScoreRecord& b) {
  if (a.value != b.value) return a.value > b.value;
  return a.patch < b.patch;
}

/// Top-`budget` records. The objective is a sum of per-patch scores, so the
/// greedy top-k is the exact constrained maximizer.
inline SelectionResult select_support(std::vector<scoring::ScoreRecord> records, std::size_t budget) {
  FSEL_CHECK(budget > 0, "malformed_config", "budget must be positive");
  FSEL_CHECK(budget <= records.size(), "budget_exceeds_pool",
             "budget " + std::to_string(budget) + " exceeds pool of " + std::to_string(records.size()));
  for (const auto& r : records)
    FSEL_CHECK(r.scorer == records.front().scorer, "mixed_scorers", "select_support expects a single scorer");
  std::vector<PatchRef> ids;
  ids.reserve(records.size());
  for (const auto& r : records) ids.push_back(r.patch);
  std::sort(ids.begin(), ids.end());
  const auto dup = std::adjacent_find(ids.begin(), ids.end());
  FSEL_CHECK(dup == ids.end(), "duplicate_patch", "pool lists patch " + (dup == ids.end() ? "" : dup->image_id) + " twice");
  std::partial_sort(records.begin(), records.begin() + static_cast<long>(budget), records.end(), ranks_before);
  records.resize(budget);
  SelectionResult out;
  out.scorer = records.front().scorer;
  out.budget = budget;
  out.threshold_score = records.back().value;
  out.chosen = std::move(records);
  return out;
}

}  // namespace fsel::selection
