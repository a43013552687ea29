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

// Acceptance gate: runs every release criterion and prints one PASS/FAIL
// line per criterion. Exit status is the number of failures.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <string>

#include "fsel/data/synth.hpp"
#include "fsel/eval/stats.hpp"
#include "fsel/imaging/filters.hpp"
#include "fsel/io/formats.hpp"
#include "fsel/nn/gradcheck.hpp"
#include "fsel/pseudolabel.hpp"
#include "fsel/scoring.hpp"
#include "fsel/selection.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace {

using namespace fsel;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", v);
  return b;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto params = testing::with_random_biases(nn::init_params(testing::tiny_architecture(), 0.5, 11), 10);
  const auto x = testing::random_image(16, 16, 12);
  const auto y = testing::random_mask(16, 16, 13, 0.3);
  nn::GradCheckOptions opts;
  opts.samples = 200;
  const auto r = nn::grad_check(params, x, y, 1.7, opts);
  const double secs = seconds_since(t0);
  return {r.max_rel_error <= 1e-3 && r.checked >= 200 && secs < 30.0,
          "max rel err " + sci(r.max_rel_error) + " over " + std::to_string(r.checked) + " of " +
              std::to_string(params.parameter_count()) + " params (" + std::to_string(r.skipped) +
              " kink-straddling probes redrawn), " + sci(secs) + " s"};
}

Outcome consistency_oracle() {
  const auto params = nn::init_params(nn::fcrn_architecture(), 0.5, 21);
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto x = testing::random_image(16, 16, 100 + s);
    const double w = 0.5 + 0.05 * static_cast<double>(s);
    worst = std::max(worst, std::abs(scoring::consistency_score(params, x, 1.3, w) - oracle::consistency(params, x, 1.3, w)));
  }
  return {worst <= 1e-9, "max |diff| " + sci(worst) + " on 50 patches"};
}

Outcome analytic_anchors() {
  const auto half = nn::zero_params(nn::fcrn_architecture(), 0.5);
  const auto x = testing::random_image(16, 16, 5);
  const double c = scoring::consistency_score(half, x, 1.3, 1.0);
  const double e = scoring::entropy_score(half, x);
  const auto trained = nn::init_params(nn::fcrn_architecture(), 0.0, 6);
  const double ent = scoring::entropy_score(trained, x);
  const double mc = scoring::mc_dropout_score(trained, x, 10, 77);
  const double ln2 = std::numbers::ln2;
  const bool ok = std::abs(c - 3 * ln2) <= 1e-9 && std::abs(e - ln2) <= 1e-12 && mc == ent;
  return {ok, "|c-3ln2| " + sci(std::abs(c - 3 * ln2)) + ", |e-ln2| " + sci(std::abs(e - ln2)) +
                  ", mc(p=0)==entropy " + (mc == ent ? "bitwise" : "NO")};
}

Outcome selection_optimality() {
  std::mt19937_64 rng(4);
  std::size_t bad = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 12, budget = 1 + rng() % std::min<std::size_t>(4, n);
    std::vector<scoring::ScoreRecord> pool;
    std::vector<double> scores;
    for (std::size_t i = 0; i < n; ++i) {
      scores.push_back(static_cast<double>(rng() % 10) / 4.0);
      pool.push_back({{"img" + std::to_string(i), 0, 0, 16}, scoring::Scorer::Consistency, scores.back(), 1.3});
    }
    const auto sel = selection::select_support(pool, budget);
    double total = 0.0;
    for (const auto& r : sel.chosen) total += r.value;
    bad += sel.chosen.size() != budget || total != oracle::best_subset_total(scores, budget);
  }
  return {bad == 0, std::to_string(200 - bad) + "/200 pools optimal with exact budget"};
}

Outcome budget_arithmetic() {
  const auto tnbc = selection::budget_from_shots(3, 100), sstem = selection::budget_from_shots(1, 500),
             em = selection::budget_from_shots(10, 400);
  return {tnbc == 300 && sstem == 500 && em == 4000,
          "TNBC 3-shot " + std::to_string(tnbc) + ", ssTEM 1-shot " + std::to_string(sstem) + ", EM 10-shot " +
              std::to_string(em)};
}

Outcome pseudo_label_pipeline() {
  const auto d = data::generate_domain(0, 16, 64, 1);
  double iou = 0.0;
  bool composed = true;
  for (const auto& s : d.samples) {
    const auto pl = pseudolabel::pipeline_mask(s.image, d.suggested_gamma);
    composed &= pl == imaging::dilate2x2(imaging::threshold(imaging::equalize(s.image), d.suggested_gamma));
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pl.size(); ++i) {
      inter += pl.pixels[i] && s.mask.pixels[i];
      uni += pl.pixels[i] || s.mask.pixels[i];
    }
    iou += uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
  }
  iou /= static_cast<double>(d.samples.size());
  return {iou >= 0.6 && composed, d.id + " mean IoU " + sci(iou) + " at gamma " + sci(d.suggested_gamma) +
                                      ", composition " + (composed ? "bitwise equal" : "DIFFERS")};
}

Outcome wilcoxon_exact() {
  std::mt19937_64 rng(8);
  std::size_t cases = 0, bad = 0;
  for (std::size_t n = 1; n <= 12; ++n)
    for (int t = 0; t < 25; ++t) {
      std::vector<double> base(n, 0.5), ours(n);
      bool any = false;
      for (auto& v : ours) {
        v = 0.5 + 0.05 * (static_cast<double>(rng() % 9) - 4.0);
        any |= v != 0.5;
      }
      if (!any) continue;
      ++cases;
      bad += eval::wilcoxon_one_sided(base, ours).p_value != oracle::wilcoxon_bruteforce(base, ours);
    }
  const double p5 = eval::wilcoxon_one_sided({0, 0, 0, 0, 0}, {0.1, 0.2, 0.3, 0.4, 0.5}).p_value;
  return {bad == 0 && p5 == 0.03125,
          std::to_string(cases - bad) + "/" + std::to_string(cases) + " match enumeration, n=5 all-positive p=" + sci(p5)};
}

Outcome morphology_properties() {
  std::size_t extensive = 0, monotone = 0, thresh = 0;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const auto b = testing::random_mask(16, 16, s, 0.3);
    auto a = b;
    const auto cut = testing::random_mask(16, 16, s + 5000, 0.5);
    for (std::size_t i = 0; i < a.size(); ++i) a.pixels[i] &= cut.pixels[i];
    const auto db = imaging::dilate2x2(b), da = imaging::dilate2x2(a);
    bool ext = true, mono = true;
    for (std::size_t i = 0; i < b.size(); ++i) {
      ext &= !b.pixels[i] || db.pixels[i];
      mono &= !da.pixels[i] || db.pixels[i];
    }
    extensive += ext;
    monotone += mono;

    const auto x = testing::random_image(16, 16, s + 9000);
    const double g1 = testing::random_image(1, 1, s).pixels[0], g2 = std::min(1.0, g1 + 0.2);
    const auto t1 = imaging::threshold(x, g1), t2 = imaging::threshold(x, g2);
    bool tm = true;
    for (std::size_t i = 0; i < t1.size(); ++i) tm &= !t1.pixels[i] || t2.pixels[i];
    thresh += tm;
  }
  return {extensive == 1000 && monotone == 1000 && thresh == 1000,
          "extensive " + std::to_string(extensive) + "/1000, monotone " + std::to_string(monotone) +
              "/1000, threshold monotone " + std::to_string(thresh) + "/1000"};
}

// --- end-to-end benchmark ---------------------------------------------------

const fs::path kBench = fs::temp_directory_path() / "fsel_acceptance";

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FSEL_CLI_PATH) + " " + args + " > /dev/null";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

const char* kBenchConfig = R"({
  "data_root": "data",
  "target": "d3_organelles",
  "patch_size": 32,
  "patches_per_image": 4,
  "architecture": {"channels": [8, 16, 32]},
  "pretrain": {"epochs": 30, "lr": 0.003},
  "pseudo": {"epochs": 30, "lr": 0.001},
  "finetune": {"epochs": 20, "lr": 0.001},
  "scorers": ["consistency", "random"],
  "shots": [1, 3],
  "n_splits": 10,
  "overlay_samples": 2,
  "seed": 0
})";

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = io::read_text(e.path());
  return out;
}

double bench_seconds = 0.0;

Outcome end_to_end() {
  fs::remove_all(kBench);
  fs::create_directories(kBench);
  io::write_text(kBench / "config.json", kBenchConfig);
  const auto t0 = std::chrono::steady_clock::now();
  if (run_cli("synth-gen --domains 4 --images 16 --size 64 --seed 1 --out '" + (kBench / "data").string() + "'"))
    return {false, "synth-gen failed"};
  if (run_cli("experiment --config '" + (kBench / "config.json").string() + "' --out '" + (kBench / "run1").string() + "'"))
    return {false, "experiment failed"};
  bench_seconds = seconds_since(t0);

  std::map<std::pair<std::string, std::size_t>, std::vector<double>> by;
  std::vector<double> tuned, prime;
  for (const auto& r : io::read_results_csv(kBench / "run1" / "results.csv")) {
    if (r.miou < 0.0 || r.miou > 1.0) return {false, "mIoU out of range"};
    (r.scorer == "no_finetune" ? prime : tuned).push_back(r.miou);
    by[{r.scorer, r.shots}].push_back(r.miou);
  }
  auto mean = [](const std::vector<double>& v) { return eval::mean_std(v).mean; };
  const double gain = mean(tuned) - mean(prime);
  bool consistency_ok = true;
  std::string per_shot;
  for (std::size_t shots : {1, 3}) {
    const double c = mean(by.at({"consistency", shots})), r = mean(by.at({"random", shots}));
    consistency_ok &= c >= r - 0.01;
    per_shot += ", " + std::to_string(shots) + "-shot consistency " + sci(100 * c) + "% vs random " + sci(100 * r) + "%";
  }
  const bool reports = fs::exists(kBench / "run1" / "aggregate.md") && fs::exists(kBench / "run1" / "wilcoxon.csv") &&
                       io::read_text(kBench / "run1" / "wilcoxon.csv").find("random,1,") != std::string::npos;
  return {gain >= 0.05 && consistency_ok && reports && bench_seconds <= 900.0,
          "fine-tune gain " + sci(100 * gain) + " pp over theta' (" + sci(100 * mean(prime)) + "%)" + per_shot +
              ", reports " + (reports ? "written" : "MISSING") + ", " + sci(bench_seconds) + " s"};
}

Outcome determinism() {
  if (!fs::exists(kBench / "run1" / "results.csv")) return {false, "benchmark run missing"};
  if (run_cli("experiment --config '" + (kBench / "config.json").string() + "' --out '" + (kBench / "run2").string() + "'"))
    return {false, "second experiment failed"};
  const auto a = tree(kBench / "run1"), b = tree(kBench / "run2");
  std::size_t differ = 0;
  for (const auto& [rel, bytes] : a) differ += !b.count(rel) || b.at(rel) != bytes;
  return {differ == 0 && a.size() == b.size(),
          std::to_string(a.size()) + " files compared, " + std::to_string(differ) + " differ"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"consistency score oracle equivalence", consistency_oracle},
      {"analytic score anchors", analytic_anchors},
      {"selection optimality", selection_optimality},
      {"budget arithmetic", budget_arithmetic},
      {"pseudo-label pipeline", pseudo_label_pipeline},
      {"wilcoxon exact test", wilcoxon_exact},
      {"morphology and threshold properties", morphology_properties},
      {"end-to-end directional check", end_to_end},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << i + 1 << ". " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " acceptance criteria passed" << std::endl;
  return failures;
}
