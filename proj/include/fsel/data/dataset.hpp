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
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fsel/data/synth.hpp"
#include "fsel/error.hpp"
#include "fsel/image.hpp"
#include "fsel/imaging/png_io.hpp"
#include "json.hpp"

namespace fsel::data {

namespace fs = std::filesystem;

struct Entry {
  std::string id;  // file stem
  GrayImage image;
  std::optional<BinaryMask> label;
};

/// One dataset directory: images/*.png with optional labels/*.png matched by
/// filename.
struct Dataset {
  std::string id;
  std::vector<Entry> entries;  // sorted by id

  const Entry& at(const std::string& image_id) const {
    const auto it = std::lower_bound(entries.begin(), entries.end(), image_id,
                                     [](const Entry& e, const std::string& k) { return e.id < k; });
    FSEL_CHECK(it != entries.end() && it->id == image_id, "unknown_image",
               "image '" + image_id + "' not in dataset " + id);
    return *it;
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& e : entries) out.push_back(e.id);
    return out;
  }

  const BinaryMask& label(const std::string& image_id) const {
    const auto& e = at(image_id);
    FSEL_CHECK(e.label.has_value(), "missing_label", "no label file for " + id + "/" + image_id);
    return *e.label;
  }
};

inline std::vector<fs::path> png_files(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& de : fs::directory_iterator(dir))
    if (de.is_regular_file() && de.path().extension() == ".png") out.push_back(de.path());
  std::sort(out.begin(), out.end());
  return out;
}

inline Dataset load_dataset(const fs::path& dir) {
  Dataset ds;
  ds.id = dir.filename().string();
  const auto images = png_files(dir / "images");
  FSEL_CHECK(!images.empty(), "empty_dataset", "no images under " + (dir / "images").string());
  for (const auto& p : images) {
    Entry e{p.stem().string(), imaging::read_gray_png(p.string()), std::nullopt};
    const auto lp = dir / "labels" / p.filename();
    if (fs::exists(lp)) {
      e.label = imaging::read_mask_png(lp.string());
      require_same_shape(e.image, *e.label, ds.id + "/" + e.id + " label");
    }
    ds.entries.push_back(std::move(e));
  }
  return ds;
}

/// Every subdirectory of `root` that holds an images/ folder, sorted by name.
inline std::vector<std::string> discover_datasets(const fs::path& root) {
  FSEL_CHECK(fs::is_directory(root), "missing_artifact", "data root not found: " + root.string());
  std::vector<std::string> out;
  for (const auto& de : fs::directory_iterator(root))
    if (de.is_directory() && fs::is_directory(de.path() / "images")) out.push_back(de.path().filename().string());
  std::sort(out.begin(), out.end());
  FSEL_CHECK(!out.empty(), "empty_dataset", "no datasets under " + root.string());
  return out;
}

inline void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  FSEL_CHECK(!ec && fs::is_directory(dir), "unwritable_output", "cannot create directory " + dir.string());
}

inline constexpr const char* kSynthManifest = "manifest.json";

/// Writes root/<domain>/{images,labels}/<id>.png plus root/manifest.json.
inline void write_synth_tree(const fs::path& root, const std::vector<SynthDomain>& domains, std::uint64_t seed) {
  ensure_directory(root);
  nlohmann::ordered_json manifest;
  manifest["seed"] = seed;
  manifest["domains"] = nlohmann::ordered_json::array();
  for (const auto& d : domains) {
    ensure_directory(root / d.id / "images");
    ensure_directory(root / d.id / "labels");
    for (const auto& s : d.samples) {
      imaging::write_gray_png((root / d.id / "images" / (s.id + ".png")).string(), s.image);
      imaging::write_mask_png((root / d.id / "labels" / (s.id + ".png")).string(), s.mask);
    }
    manifest["domains"].push_back({{"id", d.id},
                                   {"style", to_string(d.style)},
                                   {"suggested_gamma", d.suggested_gamma},
                                   {"images", d.samples.size()}});
  }
  std::ofstream os(root / kSynthManifest);
  FSEL_CHECK(os, "unwritable_output", "cannot write " + (root / kSynthManifest).string());
  os << manifest.dump(2) << '\n';
}

/// Suggested gamma per dataset from a synth manifest, if one exists.
inline std::map<std::string, double> read_suggested_gammas(const fs::path& root) {
  std::map<std::string, double> out;
  std::ifstream is(root / kSynthManifest);
  if (!is) return out;
  try {
    const auto j = nlohmann::json::parse(is);
    for (const auto& d : j.at("domains")) out[d.at("id").get<std::string>()] = d.at("suggested_gamma").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed_config", "bad synth manifest: " + std::string(e.what()));
  }
  return out;
}

}  // namespace fsel::data
