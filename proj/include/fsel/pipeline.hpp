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
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fsel/config.hpp"
#include "fsel/data/dataset.hpp"
#include "fsel/eval/metrics.hpp"
#include "fsel/eval/splits.hpp"
#include "fsel/eval/stats.hpp"
#include "fsel/imaging/overlay.hpp"
#include "fsel/imaging/patches.hpp"
#include "fsel/imaging/png_io.hpp"
#include "fsel/io/formats.hpp"
#include "fsel/nn/checkpoint.hpp"
#include "fsel/pseudolabel.hpp"
#include "fsel/scoring.hpp"
#include "fsel/selection.hpp"
#include "fsel/training.hpp"

// Algorithm stages over an on-disk workspace. Each stage is a pure function
// of the config and its inputs and writes its artifacts under out_dir; the
// CLI subcommands and run_experiment call the same functions.
namespace fsel::pipeline {

inline constexpr const char* kNoFinetune = "no_finetune";

/// Output tree:
///   <out>/<target>/pretrain/{theta.ckpt,log.json}
///   <out>/<target>/pseudo/{labels/*.png,manifest.json,theta_prime.ckpt,log.json}
///   <out>/<target>/splits.json
///   <out>/<target>/split_<seed>/{scores_*.csv,selection_*.json,finetune_*.{ckpt,json},result_*.csv}
///   <out>/<target>/overlays/split_<seed>/<scorer>_<shots>shot/<image>.png
///   <out>/{results.csv,aggregate.md,aggregate.csv,wilcoxon.csv}
struct Layout {
  fs::path root;

  fs::path target(const std::string& t) const { return root / t; }
  fs::path theta(const std::string& t) const { return target(t) / "pretrain" / "theta.ckpt"; }
  fs::path pretrain_log(const std::string& t) const { return target(t) / "pretrain" / "log.json"; }
  fs::path pseudo_label(const std::string& t, const std::string& id) const {
    return target(t) / "pseudo" / "labels" / (id + ".png");
  }
  fs::path pseudo_manifest(const std::string& t) const { return target(t) / "pseudo" / "manifest.json"; }
  fs::path theta_prime(const std::string& t) const { return target(t) / "pseudo" / "theta_prime.ckpt"; }
  fs::path pseudo_log(const std::string& t) const { return target(t) / "pseudo" / "log.json"; }
  fs::path splits(const std::string& t) const { return target(t) / "splits.json"; }
  fs::path split(const std::string& t, std::uint64_t s) const { return target(t) / ("split_" + std::to_string(s)); }
  fs::path scores(const std::string& t, std::uint64_t s, const std::string& scorer) const {
    return split(t, s) / ("scores_" + scorer + ".csv");
  }
  fs::path selection(const std::string& t, std::uint64_t s, const std::string& scorer, std::size_t budget) const {
    return split(t, s) / ("selection_" + scorer + "_b" + std::to_string(budget) + ".json");
  }
  fs::path finetuned(const std::string& t, std::uint64_t s, const std::string& scorer, std::size_t budget) const {
    return split(t, s) / ("finetune_" + scorer + "_b" + std::to_string(budget) + ".ckpt");
  }
  fs::path finetune_log(const std::string& t, std::uint64_t s, const std::string& scorer, std::size_t budget) const {
    return split(t, s) / ("finetune_" + scorer + "_b" + std::to_string(budget) + "_log.json");
  }
  fs::path result(const std::string& t, std::uint64_t s, const std::string& label, std::size_t shots) const {
    return split(t, s) / (label == kNoFinetune ? "result_no_finetune.csv"
                                              : "result_" + label + "_" + std::to_string(shots) + "shot.csv");
  }
  fs::path overlay_dir(const std::string& t, std::uint64_t s, const std::string& label, std::size_t shots) const {
    return target(t) / "overlays" / ("split_" + std::to_string(s)) /
           (label == kNoFinetune ? label : label + "_" + std::to_string(shots) + "shot");
  }
  fs::path results() const { return root / "results.csv"; }
  fs::path aggregate_md() const { return root / "aggregate.md"; }
  fs::path aggregate_csv() const { return root / "aggregate.csv"; }
  fs::path wilcoxon() const { return root / "wilcoxon.csv"; }
};

/// Lazily loaded datasets plus the resolved per-dataset settings.
class Workspace {
 public:
  explicit Workspace(PipelineConfig cfg) : cfg_(std::move(cfg)), layout_{cfg_.out_dir} {
    cfg_.validate();
    ids_ = data::discover_datasets(cfg_.data_root);
    suggested_ = data::read_suggested_gammas(cfg_.data_root);
  }

  const PipelineConfig& config() const { return cfg_; }
  const Layout& layout() const { return layout_; }
  const std::vector<std::string>& dataset_ids() const { return ids_; }

  const data::Dataset& dataset(const std::string& id) {
    FSEL_CHECK(std::find(ids_.begin(), ids_.end(), id) != ids_.end(), "unknown_target",
               "dataset '" + id + "' not found under " + cfg_.data_root.string());
    auto it = cache_.find(id);
    if (it == cache_.end()) it = cache_.emplace(id, data::load_dataset(cfg_.data_root / id)).first;
    return it->second;
  }

  /// Config override, else the generator's suggestion, else the global default.
  double gamma(const std::string& id) const {
    const auto o = cfg_.datasets.find(id);
    if (o != cfg_.datasets.end() && o->second.gamma) return *o->second.gamma;
    const auto s = suggested_.find(id);
    return s != suggested_.end() ? s->second : cfg_.gamma;
  }
  double psi(const std::string& id) const { return cfg_.psi_for(id); }
  std::size_t patches_per_image(const std::string& id) const { return cfg_.patches_per_image_for(id); }
  std::size_t budget(const std::string& target, std::size_t shots) const {
    return selection::budget_from_shots(shots, patches_per_image(target));
  }

  nn::ModelParams initial_params() const { return nn::init_params(cfg_.architecture, cfg_.dropout_p, cfg_.init_seed); }

 private:
  PipelineConfig cfg_;
  Layout layout_;
  std::vector<std::string> ids_;
  std::map<std::string, double> suggested_;
  std::map<std::string, data::Dataset> cache_;
};

template <typename F>
auto in_stage(const std::string& where, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw e.with_context(where);
  } catch (const std::exception& e) {
    throw Error("internal", e.what()).with_context(where);
  }
}

inline std::string where(const char* stage, const std::string& target) {
  return "stage=" + std::string(stage) + " target=" + target;
}
inline std::string where(const char* stage, const eval::SplitPlan& plan) {
  return where(stage, plan.target) + " split=" + std::to_string(plan.split_seed);
}

inline void save_model(const fs::path& p, const nn::ModelParams& params) {
  data::ensure_directory(p.parent_path());
  nn::save_checkpoint(p.string(), params);
}

// --- pretrain --------------------------------------------------------------

/// Labeled patch sets of every dataset except the target.
inline std::vector<training::LabeledDataset> source_sets(Workspace& ws, const std::string& target) {
  std::vector<training::LabeledDataset> out;
  const std::size_t size = ws.config().patch_size;
  for (const auto& id : ws.dataset_ids()) {
    if (id == target) continue;
    training::LabeledDataset ds{id, {}, {}};
    for (const auto& e : ws.dataset(id).entries) {
      if (!e.label) continue;
      for (const auto& ref : imaging::extract_patches(e.id, e.image, size, ws.patches_per_image(id))) {
        ds.images.push_back(crop(e.image, ref));
        ds.masks.push_back(crop(*e.label, ref));
      }
    }
    FSEL_CHECK(!ds.images.empty(), "empty_source", "source dataset " + id + " has no labeled images");
    out.push_back(std::move(ds));
  }
  return out;
}

inline nn::ModelParams run_pretrain(Workspace& ws, const std::string& target) {
  return in_stage(where("pretrain", target), [&] {
    ws.dataset(target);
    training::TrainingLog log;
    auto theta = training::pretrain_sources(source_sets(ws, target), ws.initial_params(), ws.config().pretrain,
                                            ws.config().orientation, &log);
    save_model(ws.layout().theta(target), theta);
    io::write_json(ws.layout().pretrain_log(target), io::training_log_json(log));
    return theta;
  });
}

// --- pseudo-labels ---------------------------------------------------------

struct PseudoStage {
  pseudolabel::PseudoLabeledSet set;
  nn::ModelParams theta_prime;
};

/// Pseudo-labels every target image and adapts theta to them.
inline PseudoStage run_pseudolabel(Workspace& ws, const std::string& target, const nn::ModelParams& theta) {
  return in_stage(where("pseudolabel", target), [&] {
    const auto& cfg = ws.config();
    std::vector<pseudolabel::NamedImage> images;
    for (const auto& e : ws.dataset(target).entries) images.push_back({e.id, e.image});
    PseudoStage out;
    out.set = cfg.pseudo_method == pseudolabel::Method::Pipeline
                  ? pseudolabel::generate_pipeline(images, ws.gamma(target), cfg.threads)
                  : pseudolabel::generate_kmeans(images, cfg.threads);
    data::ensure_directory(ws.layout().pseudo_label(target, "x").parent_path());
    for (const auto& it : out.set.items)
      imaging::write_mask_png(ws.layout().pseudo_label(target, it.image_id).string(), it.mask);
    io::write_json(ws.layout().pseudo_manifest(target), io::pseudo_manifest_json(out.set));
    training::TrainingLog log;
    out.theta_prime = training::fit_pseudo(theta, out.set, cfg.patch_size, ws.patches_per_image(target), cfg.pseudo,
                                           cfg.orientation, &log);
    save_model(ws.layout().theta_prime(target), out.theta_prime);
    io::write_json(ws.layout().pseudo_log(target), io::training_log_json(log));
    return out;
  });
}

/// Pseudo-label masks written by run_pseudolabel, in dataset order.
inline std::vector<BinaryMask> load_pseudo_masks(Workspace& ws, const std::string& target) {
  std::vector<BinaryMask> out;
  for (const auto& e : ws.dataset(target).entries) {
    const auto p = ws.layout().pseudo_label(target, e.id);
    FSEL_CHECK(fs::exists(p), "missing_artifact", "pseudo-label not found: " + p.string() + " (run pseudolabel)");
    out.push_back(imaging::read_mask_png(p.string()));
  }
  return out;
}

inline nn::ModelParams load_model(const fs::path& p, const char* producer) {
  FSEL_CHECK(fs::exists(p), "missing_artifact",
             "checkpoint not found: " + p.string() + " (run " + std::string(producer) + ")");
  return nn::load_checkpoint(p.string());
}

// --- splits ----------------------------------------------------------------

inline eval::LeaveOneOut run_splits(Workspace& ws, const std::string& target) {
  return in_stage(where("splits", target), [&] {
    std::map<std::string, std::vector<std::string>> ids;
    for (const auto& id : ws.dataset_ids()) ids[id] = id == target ? ws.dataset(id).ids() : std::vector<std::string>{};
    const auto& cfg = ws.config();
    auto loo = eval::make_splits(ids, target, cfg.pool_fraction, cfg.n_splits, cfg.seed);
    io::write_json(ws.layout().splits(target), io::splits_json(loo));
    return loo;
  });
}

/// Plan with the given index (0-based) from the seeded split sequence.
inline eval::SplitPlan plan_at(Workspace& ws, const std::string& target, std::size_t index) {
  const auto loo = run_splits(ws, target);
  FSEL_CHECK(index < loo.plans.size(), "malformed_config",
             "split index " + std::to_string(index) + " out of range (n_splits=" + std::to_string(loo.plans.size()) + ")");
  return loo.plans[index];
}

// --- scoring and selection ---------------------------------------------------

/// Class weight used inside the consistency score: config override, else
/// derived from the target's pseudo-labels.
inline double scoring_weight(const Workspace& ws, const std::vector<BinaryMask>& pseudo_masks) {
  if (ws.config().score_weight) return *ws.config().score_weight;
  return nn::class_weight_or_one(pseudo_masks, ws.config().orientation);
}

inline std::vector<PatchRef> pool_patches(Workspace& ws, const eval::SplitPlan& plan) {
  std::vector<PatchRef> pool;
  const auto& ds = ws.dataset(plan.target);
  for (const auto& id : plan.pool_ids) {
    const auto refs = imaging::extract_patches(id, ds.at(id).image, ws.config().patch_size,
                                               ws.patches_per_image(plan.target));
    pool.insert(pool.end(), refs.begin(), refs.end());
  }
  return pool;
}

inline std::uint64_t scoring_seed(const PipelineConfig& cfg, const eval::SplitPlan& plan) {
  return hash_combine(hash_combine(cfg.seed, 4), plan.split_seed);
}

inline std::vector<scoring::ScoreRecord> run_score(Workspace& ws, const eval::SplitPlan& plan,
                                                   const nn::ModelParams& theta_prime, scoring::Scorer scorer,
                                                   double w) {
  return in_stage(where("score", plan) + " scorer=" + scoring::to_string(scorer), [&] {
    const auto& cfg = ws.config();
    scoring::ScoringConfig sc;
    sc.scorer = scorer;
    sc.psi = ws.psi(plan.target);
    sc.w = w;
    sc.aug_set = cfg.aug_set;
    sc.mc_passes = cfg.mc_passes;
    sc.seed = scoring_seed(cfg, plan);
    sc.threads = cfg.threads;
    const auto& ds = ws.dataset(plan.target);
    auto records = scoring::score_pool(theta_prime, pool_patches(ws, plan),
                                       [&](const PatchRef& r) { return crop(ds.at(r.image_id).image, r); }, sc);
    io::write_scores_csv(ws.layout().scores(plan.target, plan.split_seed, scoring::to_string(scorer)), records);
    return records;
  });
}

inline selection::SelectionResult run_select(Workspace& ws, const eval::SplitPlan& plan,
                                             const std::vector<scoring::ScoreRecord>& records, std::size_t budget) {
  const std::string scorer = records.empty() ? "?" : scoring::to_string(records.front().scorer);
  return in_stage(where("select", plan) + " scorer=" + scorer, [&] {
    auto sel = selection::select_support(records, budget);
    io::write_json(ws.layout().selection(plan.target, plan.split_seed, scorer, budget), io::selection_json(sel));
    return sel;
  });
}

// --- fine-tuning and evaluation ----------------------------------------------

inline nn::ModelParams run_finetune(Workspace& ws, const eval::SplitPlan& plan, const nn::ModelParams& theta_prime,
                                    const selection::SelectionResult& support) {
  const std::string scorer = scoring::to_string(support.scorer);
  return in_stage(where("finetune", plan) + " scorer=" + scorer, [&] {
    const std::set<std::string> pool(plan.pool_ids.begin(), plan.pool_ids.end());
    const auto& ds = ws.dataset(plan.target);
    std::vector<GrayImage> patches;
    std::vector<BinaryMask> masks;
    for (const auto& r : support.patches()) {
      FSEL_CHECK(pool.count(r.image_id), "support_outside_pool", "support patch from non-pool image " + r.image_id);
      patches.push_back(crop(ds.at(r.image_id).image, r));
      masks.push_back(crop(ds.label(r.image_id), r));
    }
    training::TrainingLog log;
    auto theta_star = training::finetune_support(theta_prime, patches, masks, ws.config().finetune,
                                                 ws.config().orientation, &log);
    save_model(ws.layout().finetuned(plan.target, plan.split_seed, scorer, support.budget), theta_star);
    io::write_json(ws.layout().finetune_log(plan.target, plan.split_seed, scorer, support.budget),
                   io::training_log_json(log));
    return theta_star;
  });
}

/// Full-resolution mIoU over the plan's test images. `support`, when given,
/// must not touch any test image.
inline eval::RunResult run_evaluate(Workspace& ws, const eval::SplitPlan& plan, const nn::ModelParams& params,
                                    const std::string& label, std::size_t shots,
                                    const selection::SelectionResult* support = nullptr) {
  return in_stage(where("evaluate", plan) + " scorer=" + label, [&] {
    const auto& cfg = ws.config();
    const std::set<std::string> test(plan.test_ids.begin(), plan.test_ids.end());
    if (support)
      for (const auto& r : support->chosen)
        FSEL_CHECK(!test.count(r.patch.image_id), "support_in_test",
                   "test image " + r.patch.image_id + " appears in the support set");
    const auto& ds = ws.dataset(plan.target);
    std::vector<PredictionMap> preds(plan.test_ids.size());
    std::vector<BinaryMask> gts;
    for (const auto& id : plan.test_ids) gts.push_back(ds.label(id));
    parallel_for(plan.test_ids.size(), cfg.threads,
                 [&](std::size_t i) { preds[i] = nn::forward(params, ds.at(plan.test_ids[i]).image, false); });
    eval::RunResult r{plan.target, label, shots, plan.split_seed,
                      eval::mean_iou(preds, gts, cfg.miou_threshold, cfg.miou_mode)};

    const std::size_t n_overlay = std::min(cfg.overlay_samples, plan.test_ids.size());
    if (n_overlay) data::ensure_directory(ws.layout().overlay_dir(plan.target, plan.split_seed, label, shots));
    for (std::size_t i = 0; i < n_overlay; ++i)
      imaging::write_rgb_png((ws.layout().overlay_dir(plan.target, plan.split_seed, label, shots) /
                              (plan.test_ids[i] + ".png"))
                                 .string(),
                             imaging::confusion_overlay(eval::binarize(preds[i], cfg.miou_threshold), gts[i]));
    io::write_text(ws.layout().result(plan.target, plan.split_seed, label, shots), io::results_csv({r}));
    return r;
  });
}

// --- reports -----------------------------------------------------------------

/// Consistency against every other scorer, per target and shot count, paired
/// over splits. A baseline identical to consistency on every split gets n=0, p=1.
inline std::vector<io::WilcoxonRow> wilcoxon_rows(const std::vector<eval::RunResult>& results) {
  std::map<std::tuple<std::string, std::string, std::size_t>, std::map<std::uint64_t, double>> by;
  for (const auto& r : results) by[{r.target, r.scorer, r.shots}][r.split_seed] = r.miou;
  std::vector<io::WilcoxonRow> rows;
  const std::string ours = scoring::to_string(scoring::Scorer::Consistency);
  for (const auto& [key, base] : by) {
    const auto& [target, scorer, shots] = key;
    if (scorer == ours || scorer == kNoFinetune) continue;
    const auto it = by.find({target, ours, shots});
    if (it == by.end()) continue;
    std::vector<double> b, o;
    for (const auto& [seed, v] : base) {
      const auto m = it->second.find(seed);
      if (m == it->second.end()) continue;
      b.push_back(v);
      o.push_back(m->second);
    }
    if (b.empty()) continue;
    io::WilcoxonRow row{target, scorer, shots, {0, 0.0, 1.0, true}};
    try {
      row.result = eval::wilcoxon_one_sided(b, o);
    } catch (const Error& e) {
      if (e.code() != "all_differences_zero") throw;
    }
    rows.push_back(row);
  }
  return rows;
}

inline void write_reports(const Layout& layout, const std::vector<eval::RunResult>& results) {
  io::write_text(layout.results(), io::results_csv(results));
  const auto agg = eval::aggregate(results);
  io::write_text(layout.aggregate_md(), io::aggregate_markdown(agg));
  io::write_text(layout.aggregate_csv(), io::aggregate_csv(agg));
  io::write_text(layout.wilcoxon(), io::wilcoxon_csv(wilcoxon_rows(results)));
}

// --- end to end --------------------------------------------------------------

struct TargetModels {
  nn::ModelParams theta_prime;
  double score_w = 1.0;
};

inline TargetModels target_models(Workspace& ws, const std::string& target) {
  const auto theta = run_pretrain(ws, target);
  auto ps = run_pseudolabel(ws, target, theta);
  return {std::move(ps.theta_prime), scoring_weight(ws, ps.set.masks())};
}

/// Every (target, split, scorer, shots) run plus a no-fine-tune baseline per
/// split; writes all stage artifacts and the reports. Pretraining and the
/// pseudo-label fit do not depend on the split and are computed once per
/// target unless cache_phases is off.
inline std::vector<eval::RunResult> run_experiment(Workspace& ws) {
  const auto& cfg = ws.config();
  FSEL_CHECK(!cfg.targets.empty(), "malformed_config", "no target dataset configured");
  std::vector<eval::RunResult> results;
  for (const auto& target : cfg.targets) {
    const auto loo = run_splits(ws, target);
    std::optional<TargetModels> cached;
    for (const auto& plan : loo.plans) {
      if (!cached || !cfg.cache_phases) cached = target_models(ws, target);
      const auto& tm = *cached;
      results.push_back(run_evaluate(ws, plan, tm.theta_prime, kNoFinetune, 0));
      for (auto scorer : cfg.scorers) {
        const auto records = run_score(ws, plan, tm.theta_prime, scorer, tm.score_w);
        for (auto shots : cfg.shots) {
          const auto sel = run_select(ws, plan, records, ws.budget(target, shots));
          const auto theta_star = run_finetune(ws, plan, tm.theta_prime, sel);
          results.push_back(run_evaluate(ws, plan, theta_star, scoring::to_string(scorer), shots, &sel));
        }
      }
    }
  }
  write_reports(ws.layout(), results);
  return results;
}

}  // namespace fsel::pipeline
