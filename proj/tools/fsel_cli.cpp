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

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "fsel/config.hpp"
#include "fsel/data/dataset.hpp"
#include "fsel/data/synth.hpp"
#include "fsel/pipeline.hpp"

namespace {

using fsel::io::Json;
namespace pl = fsel::pipeline;

struct Overrides {
  std::string config;
  std::string target;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<unsigned> threads;
  std::string miou_mode;
};

struct RunOptions {
  std::string scorer;
  std::size_t split = 0;
  std::optional<std::size_t> shots;
  std::optional<std::size_t> budget;
};

void add_common(CLI::App* cmd, Overrides& o, bool needs_target) {
  cmd->add_option("--config", o.config, "pipeline config (JSON)")->required();
  auto* t = cmd->add_option("--target", o.target, "target dataset id");
  if (needs_target) t->required();
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--miou-mode", o.miou_mode, "fg | fg_bg_mean");
}

void add_run(CLI::App* cmd, RunOptions& r, bool scorer, bool amount) {
  if (scorer) cmd->add_option("--scorer", r.scorer, "consistency | entropy | mc_dropout | random")->required();
  cmd->add_option("--split", r.split, "split index (0-based)");
  if (amount) {
    auto* s = cmd->add_option("--shots", r.shots, "shots (budget = shots x patches per image)");
    auto* b = cmd->add_option("--budget", r.budget, "support set size in patches");
    s->excludes(b);
  }
}

fsel::PipelineConfig resolve(const Overrides& o) {
  auto cfg = fsel::load_config(o.config);
  if (!o.target.empty()) cfg.targets = {o.target};
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.reseed();
  }
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (o.threads) cfg.set_threads(*o.threads);
  if (!o.miou_mode.empty()) cfg.miou_mode = fsel::eval::miou_mode_from_string(o.miou_mode);
  cfg.validate();
  return cfg;
}

std::size_t budget_of(pl::Workspace& ws, const std::string& target, const RunOptions& r) {
  if (r.budget) return *r.budget;
  FSEL_CHECK(r.shots.has_value(), "malformed_config", "pass --shots or --budget");
  return ws.budget(target, *r.shots);
}

std::size_t shots_of(pl::Workspace& ws, const std::string& target, const RunOptions& r) {
  return r.shots ? *r.shots : budget_of(ws, target, r) / ws.patches_per_image(target);
}

void emit(const Json& j) { std::cout << j.dump() << std::endl; }

int fail(const std::string& code, const std::string& message, const std::string& context = "") {
  emit({{"error", {{"code", code}, {"message", message}, {"context", context}}}});
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot support set selection for microscopy cell segmentation"};
  app.require_subcommand(1);

  std::size_t domains = 4, images = 16, size = 64;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth-gen", "write a seeded synthetic multi-domain dataset tree");
  synth->add_option("--domains", domains, "number of domains (>= 2)");
  synth->add_option("--images", images, "images per domain");
  synth->add_option("--size", size, "image side length in pixels");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--out", synth_out, "output root")->required();

  Overrides o;
  RunOptions r;
  auto* pretrain = app.add_subcommand("pretrain", "train on all non-target datasets");
  auto* pseudo = app.add_subcommand("pseudolabel", "pseudo-label the target and adapt the source model");
  auto* score = app.add_subcommand("score", "score the pool patches of one split");
  auto* select = app.add_subcommand("select", "pick the top-budget patches from a score file");
  auto* finetune = app.add_subcommand("finetune", "fine-tune on a selected support set");
  auto* evaluate = app.add_subcommand("evaluate", "mIoU on the test images of one split");
  auto* experiment = app.add_subcommand("experiment", "run every stage for all splits, scorers and shots");
  for (auto* c : {pretrain, pseudo, score, select, finetune, evaluate}) add_common(c, o, true);
  add_common(experiment, o, false);
  add_run(score, r, true, false);
  add_run(select, r, true, true);
  add_run(finetune, r, true, true);
  add_run(evaluate, r, true, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what()) + 1;
  }

  try {
    if (synth->parsed()) {
      const auto ds = fsel::data::generate(domains, images, size, synth_seed);
      fsel::data::write_synth_tree(synth_out, ds, synth_seed);
      Json ids = Json::array();
      for (const auto& d : ds) ids.push_back(d.id);
      emit({{"status", "ok"}, {"out", synth_out}, {"domains", ids}});
      return 0;
    }

    pl::Workspace ws(resolve(o));
    const auto& L = ws.layout();
    const std::string target = ws.config().targets.empty() ? "" : ws.config().targets.front();

    if (experiment->parsed()) {
      const auto results = pl::run_experiment(ws);
      emit({{"status", "ok"}, {"runs", results.size()}, {"results", L.results().string()}});
    } else if (pretrain->parsed()) {
      pl::run_pretrain(ws, target);
      emit({{"status", "ok"}, {"checkpoint", L.theta(target).string()}});
    } else if (pseudo->parsed()) {
      pl::run_pseudolabel(ws, target, pl::load_model(L.theta(target), "pretrain"));
      emit({{"status", "ok"}, {"checkpoint", L.theta_prime(target).string()}});
    } else if (score->parsed()) {
      const auto plan = pl::plan_at(ws, target, r.split);
      const auto scorer = fsel::scoring::scorer_from_string(r.scorer);
      const double w = pl::scoring_weight(ws, pl::load_pseudo_masks(ws, target));
      const auto records = pl::run_score(ws, plan, pl::load_model(L.theta_prime(target), "pseudolabel"), scorer, w);
      emit({{"status", "ok"}, {"scores", L.scores(target, plan.split_seed, r.scorer).string()}, {"pool", records.size()}});
    } else if (select->parsed()) {
      const auto plan = pl::plan_at(ws, target, r.split);
      const auto records = fsel::io::read_scores_csv(L.scores(target, plan.split_seed, r.scorer));
      const auto budget = budget_of(ws, target, r);
      pl::run_select(ws, plan, records, budget);
      emit({{"status", "ok"}, {"selection", L.selection(target, plan.split_seed, r.scorer, budget).string()}});
    } else if (finetune->parsed()) {
      const auto plan = pl::plan_at(ws, target, r.split);
      const auto budget = budget_of(ws, target, r);
      const auto sel = fsel::io::read_selection(L.selection(target, plan.split_seed, r.scorer, budget));
      pl::run_finetune(ws, plan, pl::load_model(L.theta_prime(target), "pseudolabel"), sel);
      emit({{"status", "ok"}, {"checkpoint", L.finetuned(target, plan.split_seed, r.scorer, budget).string()}});
    } else if (evaluate->parsed()) {
      const auto plan = pl::plan_at(ws, target, r.split);
      fsel::eval::RunResult res;
      if (r.scorer == pl::kNoFinetune) {
        res = pl::run_evaluate(ws, plan, pl::load_model(L.theta_prime(target), "pseudolabel"), pl::kNoFinetune, 0);
      } else {
        fsel::scoring::scorer_from_string(r.scorer);
        const auto budget = budget_of(ws, target, r);
        const auto sel = fsel::io::read_selection(L.selection(target, plan.split_seed, r.scorer, budget));
        res = pl::run_evaluate(ws, plan, pl::load_model(L.finetuned(target, plan.split_seed, r.scorer, budget), "finetune"),
                               r.scorer, shots_of(ws, target, r), &sel);
      }
      emit({{"status", "ok"}, {"miou", res.miou}, {"result", L.result(target, plan.split_seed, res.scorer, res.shots).string()}});
    }
    return 0;
  } catch (const fsel::Error& e) {
    return fail(e.code(), e.what(), e.context());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
}
