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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fsel/error.hpp"
#include "fsel/eval/splits.hpp"
#include "fsel/eval/stats.hpp"
#include "fsel/pseudolabel.hpp"
#include "fsel/scoring.hpp"
#include "fsel/selection.hpp"
#include "fsel/training.hpp"
#include "json.hpp"

// On-disk formats. Nothing here writes wall-clock data, so identical inputs
// give byte-identical files.
namespace fsel::io {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

inline std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  FSEL_CHECK(is, "missing_artifact", "required file not found: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream os(path, std::ios::binary);
  FSEL_CHECK(os, "unwritable_output", "cannot write " + path.string());
  os << text;
  FSEL_CHECK(os.good(), "unwritable_output", "failed writing " + path.string());
}

inline Json read_json(const fs::path& path) {
  const auto text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed_artifact", path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

/// 17 significant digits: parses back to the same double.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

/// Rows of a CSV with the given header; the header must match exactly.
inline std::vector<std::vector<std::string>> read_csv(const fs::path& path, const std::string& header) {
  std::istringstream ss(read_text(path));
  std::string line;
  FSEL_CHECK(std::getline(ss, line) && line == header, "malformed_artifact",
             path.string() + ": expected header '" + header + "'");
  const auto width = split_csv_line(header).size();
  std::vector<std::vector<std::string>> rows;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    FSEL_CHECK(cells.size() == width, "malformed_artifact", path.string() + ": bad row '" + line + "'");
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline void check_csv_safe(const std::string& s) {
  FSEL_CHECK(s.find_first_of(",\n\r") == std::string::npos, "malformed_config", "identifier '" + s + "' contains a comma or newline");
}

template <typename F>
auto parse_field(const std::string& cell, const fs::path& path, F f) {
  try {
    return f(cell);
  } catch (const std::exception&) {
    throw Error("malformed_artifact", path.string() + ": cannot parse '" + cell + "'");
  }
}

inline std::size_t to_size(const std::string& s) { return static_cast<std::size_t>(std::stoull(s)); }
inline double to_double(const std::string& s) { return std::stod(s); }

// --- training log ---------------------------------------------------------

inline Json training_log_json(const training::TrainingLog& log) {
  Json j = Json::array();
  for (const auto& e : log) j.push_back({{"epoch", e.epoch}, {"loss", e.loss}});
  return j;
}

// --- scores ----------------------------------------------------------------

inline constexpr const char* kScoresHeader = "image_id,row,col,size,scorer,score,psi";

inline void write_scores_csv(const fs::path& path, const std::vector<scoring::ScoreRecord>& records) {
  std::string out = std::string(kScoresHeader) + "\n";
  for (const auto& r : records) {
    check_csv_safe(r.patch.image_id);
    out += r.patch.image_id + "," + std::to_string(r.patch.row) + "," + std::to_string(r.patch.col) + "," +
           std::to_string(r.patch.size) + "," + scoring::to_string(r.scorer) + "," + fmt(r.value) + "," +
           (r.psi ? fmt(*r.psi) : "") + "\n";
  }
  write_text(path, out);
}

inline std::vector<scoring::ScoreRecord> read_scores_csv(const fs::path& path) {
  std::vector<scoring::ScoreRecord> out;
  for (const auto& c : read_csv(path, kScoresHeader)) {
    scoring::ScoreRecord r;
    r.patch = {c[0], parse_field(c[1], path, to_size), parse_field(c[2], path, to_size),
               parse_field(c[3], path, to_size)};
    r.scorer = scoring::scorer_from_string(c[4]);
    r.value = parse_field(c[5], path, to_double);
    if (!c[6].empty()) r.psi = parse_field(c[6], path, to_double);
    out.push_back(std::move(r));
  }
  return out;
}

// --- selection -------------------------------------------------------------

inline Json selection_json(const selection::SelectionResult& s) {
  Json chosen = Json::array();
  for (const auto& r : s.chosen)
    chosen.push_back({{"image_id", r.patch.image_id},
                      {"row", r.patch.row},
                      {"col", r.patch.col},
                      {"size", r.patch.size},
                      {"score", r.value}});
  return {{"scorer", scoring::to_string(s.scorer)},
          {"budget", s.budget},
          {"chosen", chosen},
          {"threshold_score", s.threshold_score}};
}

inline selection::SelectionResult read_selection(const fs::path& path) {
  const auto j = read_json(path);
  try {
    selection::SelectionResult s;
    s.scorer = scoring::scorer_from_string(j.at("scorer").get<std::string>());
    s.budget = j.at("budget").get<std::size_t>();
    s.threshold_score = j.at("threshold_score").get<double>();
    for (const auto& c : j.at("chosen"))
      s.chosen.push_back({{c.at("image_id").get<std::string>(), c.at("row").get<std::size_t>(),
                           c.at("col").get<std::size_t>(), c.at("size").get<std::size_t>()},
                          s.scorer,
                          c.at("score").get<double>(),
                          std::nullopt});
    FSEL_CHECK(s.chosen.size() == s.budget, "malformed_artifact", path.string() + ": budget does not match entries");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed_artifact", path.string() + ": " + e.what());
  }
}

// --- pseudo-labels ---------------------------------------------------------

inline Json pseudo_manifest_json(const pseudolabel::PseudoLabeledSet& set) {
  Json items = Json::array();
  for (const auto& it : set.items)
    items.push_back({{"image_id", it.image_id},
                     {"gamma", set.method == pseudolabel::Method::Pipeline ? Json(set.gamma_used) : Json()},
                     {"method", pseudolabel::to_string(set.method)}});
  return items;
}

// --- splits ----------------------------------------------------------------

inline Json splits_json(const eval::LeaveOneOut& loo) {
  Json plans = Json::array();
  for (const auto& p : loo.plans)
    plans.push_back({{"split_seed", p.split_seed}, {"pool_ids", p.pool_ids}, {"test_ids", p.test_ids}});
  return {{"target", loo.plans.empty() ? "" : loo.plans.front().target}, {"sources", loo.sources}, {"plans", plans}};
}

// --- results ---------------------------------------------------------------

inline constexpr const char* kResultsHeader = "target,scorer,shots,split_seed,miou";

inline std::string results_csv(const std::vector<eval::RunResult>& rs) {
  std::string out = std::string(kResultsHeader) + "\n";
  for (const auto& r : rs) {
    check_csv_safe(r.target);
    out += r.target + "," + r.scorer + "," + std::to_string(r.shots) + "," + std::to_string(r.split_seed) + "," +
           fmt(r.miou) + "\n";
  }
  return out;
}

inline std::vector<eval::RunResult> read_results_csv(const fs::path& path) {
  std::vector<eval::RunResult> out;
  for (const auto& c : read_csv(path, kResultsHeader))
    out.push_back({c[0], c[1], parse_field(c[2], path, to_size),
                   parse_field(c[3], path, [](const std::string& s) { return std::stoull(s); }),
                   parse_field(c[4], path, to_double)});
  return out;
}

/// Markdown table: one row per (target, scorer), one column per shot count,
/// cells "mean% ±std".
inline std::string aggregate_markdown(const std::map<eval::GroupKey, eval::MeanStd>& agg) {
  std::vector<std::size_t> shots;
  std::vector<std::pair<std::string, std::string>> rows;
  for (const auto& [k, _] : agg) {
    if (std::find(shots.begin(), shots.end(), k.shots) == shots.end()) shots.push_back(k.shots);
    const std::pair<std::string, std::string> row{k.target, k.scorer};
    if (std::find(rows.begin(), rows.end(), row) == rows.end()) rows.push_back(row);
  }
  std::sort(shots.begin(), shots.end());
  std::string out = "| Target | Selection |";
  std::string rule = "|---|---|";
  for (auto s : shots) {
    out += s == 0 ? " no fine-tune |" : " " + std::to_string(s) + "-shot |";
    rule += "---|";
  }
  out += "\n" + rule + "\n";
  for (const auto& [target, scorer] : rows) {
    out += "| " + target + " | " + scorer + " |";
    for (auto s : shots) {
      const auto it = agg.find({target, scorer, s});
      if (it == agg.end()) {
        out += " |";
        continue;
      }
      char cell[64];
      std::snprintf(cell, sizeof cell, " %.1f%% ±%.1f |", 100.0 * it->second.mean, 100.0 * it->second.std);
      out += cell;
    }
    out += "\n";
  }
  return out;
}

inline std::string aggregate_csv(const std::map<eval::GroupKey, eval::MeanStd>& agg) {
  std::string out = "target,scorer,shots,n,mean_miou,std_miou\n";
  for (const auto& [k, v] : agg)
    out += k.target + "," + k.scorer + "," + std::to_string(k.shots) + "," + std::to_string(v.n) + "," + fmt(v.mean) +
           "," + fmt(v.std) + "\n";
  return out;
}

struct WilcoxonRow {
  std::string target;
  std::string baseline;
  std::size_t shots = 0;
  eval::WilcoxonResult result;
};

inline std::string wilcoxon_csv(const std::vector<WilcoxonRow>& rows, double alpha = 0.05) {
  std::string out = "target,baseline,shots,n,w_plus,p_value,exact,significant\n";
  for (const auto& r : rows)
    out += r.target + "," + r.baseline + "," + std::to_string(r.shots) + "," + std::to_string(r.result.n) + "," +
           fmt(r.result.statistic) + "," + fmt(r.result.p_value) + "," + (r.result.exact ? "1" : "0") + "," +
           (r.result.p_value < alpha ? "1" : "0") + "\n";
  return out;
}

}  // namespace fsel::io
