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

// Scores the patches of a synthetic target domain with a pseudo-label-adapted
// model and prints the support set each scorer would send for annotation.

#include <cstdio>

#include "fsel/data/synth.hpp"
#include "fsel/imaging/patches.hpp"
#include "fsel/pseudolabel.hpp"
#include "fsel/scoring.hpp"
#include "fsel/selection.hpp"
#include "fsel/training.hpp"

int main() {
  using namespace fsel;
  const auto domain = data::generate_domain(3, 8, 64, 42);

  std::vector<pseudolabel::NamedImage> images;
  for (const auto& s : domain.samples) images.push_back({s.id, s.image});
  const auto pseudo = pseudolabel::generate_pipeline(images, domain.suggested_gamma);

  training::TrainConfig cfg;
  cfg.epochs = 15;
  cfg.lr = 1e-3;
  const auto theta = nn::init_params(nn::fcrn_architecture(8, 16, 32), 0.5, 1);
  const auto theta_prime = training::fit_pseudo(theta, pseudo, 32, 4, cfg);

  std::vector<PatchRef> pool;
  for (const auto& s : domain.samples) {
    const auto refs = imaging::extract_patches(s.id, s.image, 32, 4);
    pool.insert(pool.end(), refs.begin(), refs.end());
  }
  auto pixels = [&](const PatchRef& r) {
    for (const auto& s : domain.samples)
      if (s.id == r.image_id) return crop(s.image, r);
    throw Error("unknown_image", r.image_id);
  };

  for (auto scorer : {scoring::Scorer::Consistency, scoring::Scorer::Entropy, scoring::Scorer::McDropout,
                      scoring::Scorer::Random}) {
    scoring::ScoringConfig sc;
    sc.scorer = scorer;
    sc.w = nn::class_weight_or_one(pseudo.masks());
    const auto chosen = selection::select_support(scoring::score_pool(theta_prime, pool, pixels, sc), 4);
    std::printf("%s\n", scoring::to_string(scorer));
    for (const auto& r : chosen.chosen)
      std::printf("  %s @ (%zu, %zu)  score %.4f\n", r.patch.image_id.c_str(), r.patch.row, r.patch.col, r.value);
  }
  return 0;
}
