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

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fsel/error.hpp"
#include "fsel/eval/metrics.hpp"
#include "fsel/io/formats.hpp"
#include "fsel/nn/loss.hpp"
#include "fsel/nn/model.hpp"
#include "fsel/pseudolabel.hpp"
#include "fsel/rng.hpp"
#include "fsel/scoring.hpp"
#include "fsel/training.hpp"

namespace fsel {

namespace fs = std::filesystem;

struct DatasetOptions {
  std::optional<double> gamma;
  std::optional<double> psi;
  std::optional<std::size_t> patches_per_image;
};

/// Everything a run needs. Defaults are the published hyperparameters; a
/// config file only lists what it changes.
struct PipelineConfig {
  fs::path data_root = "data";
  fs::path out_dir = "out";
  std::vector<std::string> targets;
  std::map<std::string, DatasetOptions> datasets;

  double gamma = 0.5;
  double psi = 1.3;
  std::size_t patches_per_image = 100;
  std::size_t patch_size = 256;

  nn::Architecture architecture = nn::fcrn_architecture();
  double dropout_p = 0.5;
  std::uint64_t init_seed = 0;

  training::TrainConfig pretrain;
  training::TrainConfig pseudo;
  training::TrainConfig finetune;
  pseudolabel::Method pseudo_method = pseudolabel::Method::Pipeline;
  nn::WeightOrientation orientation = nn::WeightOrientation::BgOverFg;

  std::vector<scoring::Scorer> scorers{scoring::Scorer::Consistency, scoring::Scorer::Entropy,
                                       scoring::Scorer::McDropout, scoring::Scorer::Random};
  std::vector<std::size_t> shots{1, 3, 5, 7, 10};
  std::size_t mc_passes = 10;
  scoring::AugSet aug_set = scoring::AugSet::Pixel;
  std::optional<double> score_weight;  // overrides the pseudo-label class weight in the consistency score

  std::uint64_t seed = 0;
  bool pretrain_seed_pinned = false;
  bool pseudo_seed_pinned = false;
  bool finetune_seed_pinned = false;
  std::size_t n_splits = 10;
  double pool_fraction = 0.5;
  eval::MiouMode miou_mode = eval::MiouMode::Fg;
  double miou_threshold = 0.5;
  std::size_t overlay_samples = 2;
  bool cache_phases = true;
  unsigned threads = 1;

  PipelineConfig() {
    pretrain.epochs = 100;
    pseudo.epochs = 100;
    finetune.epochs = 20;
    reseed();
  }

  double gamma_for(const std::string& ds) const {
    const auto it = datasets.find(ds);
    return it != datasets.end() && it->second.gamma ? *it->second.gamma : gamma;
  }
  double psi_for(const std::string& ds) const {
    const auto it = datasets.find(ds);
    return it != datasets.end() && it->second.psi ? *it->second.psi : psi;
  }
  std::size_t patches_per_image_for(const std::string& ds) const {
    const auto it = datasets.find(ds);
    return it != datasets.end() && it->second.patches_per_image ? *it->second.patches_per_image : patches_per_image;
  }

  /// Phase seeds follow the master seed unless a phase pins its own.
  void reseed() {
    if (!pretrain_seed_pinned) pretrain.seed = hash_combine(seed, 1);
    if (!pseudo_seed_pinned) pseudo.seed = hash_combine(seed, 2);
    if (!finetune_seed_pinned) finetune.seed = hash_combine(seed, 3);
  }

  void set_threads(unsigned t) {
    threads = t;
    pretrain.threads = pseudo.threads = finetune.threads = t;
  }

  void validate() const {
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    FSEL_CHECK(in01(gamma), "malformed_config", "gamma must lie in [0,1]");
    FSEL_CHECK(psi > 0.0, "malformed_config", "psi must be positive");
    for (const auto& [id, o] : datasets) {
      FSEL_CHECK(!o.gamma || in01(*o.gamma), "malformed_config", id + ": gamma must lie in [0,1]");
      FSEL_CHECK(!o.psi || *o.psi > 0.0, "malformed_config", id + ": psi must be positive");
      FSEL_CHECK(!o.patches_per_image || *o.patches_per_image > 0, "malformed_config",
                 id + ": patches_per_image must be positive");
    }
    FSEL_CHECK(patches_per_image > 0, "malformed_config", "patches_per_image must be positive");
    const auto factor = nn::validate_architecture(architecture);
    FSEL_CHECK(patch_size > 0 && patch_size % factor == 0, "malformed_config",
               "patch_size must be a positive multiple of " + std::to_string(factor));
    nn::check_dropout_p(dropout_p);
    for (const auto* t : {&pretrain, &pseudo, &finetune}) t->validate();
    FSEL_CHECK(!scorers.empty(), "malformed_config", "scorer list is empty");
    FSEL_CHECK(std::set<scoring::Scorer>(scorers.begin(), scorers.end()).size() == scorers.size(), "malformed_config",
               "scorer list has duplicates");
    FSEL_CHECK(!shots.empty(), "malformed_config", "shots list is empty");
    for (auto s : shots) FSEL_CHECK(s > 0, "malformed_config", "shots must be positive");
    FSEL_CHECK(mc_passes > 0, "malformed_config", "mc_passes must be positive");
    FSEL_CHECK(!score_weight || *score_weight > 0.0, "malformed_config", "score_weight must be positive");
    FSEL_CHECK(n_splits >= 2, "malformed_config", "n_splits must be at least 2 (standard deviation needs two runs)");
    FSEL_CHECK(pool_fraction > 0.0 && pool_fraction < 1.0, "malformed_config", "pool_fraction must lie in (0,1)");
    FSEL_CHECK(miou_threshold > 0.0 && miou_threshold < 1.0, "malformed_config", "miou_threshold must lie in (0,1)");
    FSEL_CHECK(threads >= 1, "malformed_config", "threads must be positive");
  }
};

namespace detail {

using Json = io::Json;

inline void reject_unknown(const Json& j, std::initializer_list<const char*> keys, const std::string& where) {
  FSEL_CHECK(j.is_object(), "malformed_config", where + " must be an object");
  for (const auto& [k, _] : j.items()) {
    bool known = false;
    for (const char* key : keys) known |= k == key;
    FSEL_CHECK(known, "malformed_config", where + ": unknown key '" + k + "'");
  }
}

template <typename T>
void get_if(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline bool parse_train(const Json& j, training::TrainConfig& t, const std::string& where) {
  reject_unknown(j, {"epochs", "lr", "weight_decay", "batch_size", "seed", "mode", "reptile_inner_steps", "reptile_eps"},
                 where);
  get_if(j, "epochs", t.epochs);
  get_if(j, "lr", t.lr);
  get_if(j, "weight_decay", t.weight_decay);
  get_if(j, "batch_size", t.batch_size);
  get_if(j, "reptile_inner_steps", t.reptile_inner_steps);
  get_if(j, "reptile_eps", t.reptile_eps);
  if (j.contains("mode")) t.mode = training::mode_from_string(j.at("mode").get<std::string>());
  if (j.contains("seed")) {
    t.seed = j.at("seed").get<std::uint64_t>();
    return true;
  }
  return false;
}

inline nn::Architecture parse_architecture(const Json& j) {
  reject_unknown(j, {"channels", "layers"}, "architecture");
  if (j.contains("channels")) {
    const auto c = j.at("channels").get<std::vector<std::uint32_t>>();
    FSEL_CHECK(c.size() == 3, "malformed_config", "architecture.channels needs three widths");
    return nn::fcrn_architecture(c[0], c[1], c[2]);
  }
  FSEL_CHECK(j.contains("layers"), "malformed_config", "architecture needs channels or layers");
  nn::Architecture arch;
  for (const auto& l : j.at("layers")) {
    reject_unknown(l, {"kind", "kernel", "in", "out"}, "architecture.layers");
    nn::LayerSpec s;
    s.kind = nn::layer_kind_from_string(l.at("kind").get<std::string>());
    get_if(l, "kernel", s.kernel);
    get_if(l, "in", s.in);
    s.out = s.in;
    get_if(l, "out", s.out);
    arch.push_back(s);
  }
  return arch;
}

}  // namespace detail

/// Parses a JSON config. Relative paths resolve against `base_dir`.
inline PipelineConfig parse_config(const io::Json& j, const fs::path& base_dir) {
  using detail::get_if;
  PipelineConfig c;
  try {
    detail::reject_unknown(j,
                           {"data_root", "out_dir", "target", "targets", "datasets", "gamma", "psi",
                            "patches_per_image", "patch_size", "architecture", "dropout_p", "init_seed", "pretrain",
                            "pseudo", "finetune", "pseudo_method", "weight_orientation", "scorers", "shots",
                            "mc_passes", "aug_set", "score_weight", "seed", "n_splits", "pool_fraction", "miou_mode",
                            "miou_threshold", "overlay_samples", "cache_phases", "threads"},
                           "config");
    std::string s;
    if (j.contains("data_root")) c.data_root = base_dir / j.at("data_root").get<std::string>();
    else c.data_root = base_dir / c.data_root;
    if (j.contains("out_dir")) c.out_dir = base_dir / j.at("out_dir").get<std::string>();
    else c.out_dir = base_dir / c.out_dir;
    if (j.contains("target")) c.targets = {j.at("target").get<std::string>()};
    get_if(j, "targets", c.targets);
    if (j.contains("datasets")) {
      FSEL_CHECK(j.at("datasets").is_object(), "malformed_config", "datasets must be an object");
      for (const auto& [id, o] : j.at("datasets").items()) {
        detail::reject_unknown(o, {"gamma", "psi", "patches_per_image"}, "datasets." + id);
        DatasetOptions d;
        if (o.contains("gamma")) d.gamma = o.at("gamma").get<double>();
        if (o.contains("psi")) d.psi = o.at("psi").get<double>();
        if (o.contains("patches_per_image")) d.patches_per_image = o.at("patches_per_image").get<std::size_t>();
        c.datasets[id] = d;
      }
    }
    get_if(j, "gamma", c.gamma);
    get_if(j, "psi", c.psi);
    get_if(j, "patches_per_image", c.patches_per_image);
    get_if(j, "patch_size", c.patch_size);
    if (j.contains("architecture")) c.architecture = detail::parse_architecture(j.at("architecture"));
    get_if(j, "dropout_p", c.dropout_p);
    get_if(j, "init_seed", c.init_seed);
    get_if(j, "seed", c.seed);
    if (j.contains("pretrain")) c.pretrain_seed_pinned = detail::parse_train(j.at("pretrain"), c.pretrain, "pretrain");
    if (j.contains("pseudo")) c.pseudo_seed_pinned = detail::parse_train(j.at("pseudo"), c.pseudo, "pseudo");
    if (j.contains("finetune")) c.finetune_seed_pinned = detail::parse_train(j.at("finetune"), c.finetune, "finetune");
    if (j.contains("pseudo_method")) c.pseudo_method = pseudolabel::method_from_string(j.at("pseudo_method").get<std::string>());
    if (j.contains("weight_orientation"))
      c.orientation = nn::weight_orientation_from_string(j.at("weight_orientation").get<std::string>());
    if (j.contains("scorers")) {
      c.scorers.clear();
      for (const auto& name : j.at("scorers").get<std::vector<std::string>>())
        c.scorers.push_back(scoring::scorer_from_string(name));
    }
    get_if(j, "shots", c.shots);
    get_if(j, "mc_passes", c.mc_passes);
    if (j.contains("aug_set")) c.aug_set = scoring::aug_set_from_string(j.at("aug_set").get<std::string>());
    if (j.contains("score_weight") && !j.at("score_weight").is_null()) c.score_weight = j.at("score_weight").get<double>();
    get_if(j, "n_splits", c.n_splits);
    get_if(j, "pool_fraction", c.pool_fraction);
    if (j.contains("miou_mode")) c.miou_mode = eval::miou_mode_from_string(j.at("miou_mode").get<std::string>());
    get_if(j, "miou_threshold", c.miou_threshold);
    get_if(j, "overlay_samples", c.overlay_samples);
    get_if(j, "cache_phases", c.cache_phases);
    unsigned threads = 1;
    get_if(j, "threads", threads);
    c.set_threads(threads);
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed_config", std::string("config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == "malformed_config") throw;
    throw Error("malformed_config", e.what());
  }
  c.reseed();
  c.validate();
  return c;
}

inline PipelineConfig load_config(const fs::path& path) {
  FSEL_CHECK(fs::exists(path), "missing_artifact", "config not found: " + path.string());
  io::Json j;
  try {
    j = io::Json::parse(io::read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed_config", path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

}  // namespace fsel
