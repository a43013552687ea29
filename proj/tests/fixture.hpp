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
#include <string>

#include "fsel/data/dataset.hpp"
#include "fsel/data/synth.hpp"
#include "fsel/io/formats.hpp"

namespace fsel::testing {

namespace fs = std::filesystem;

/// Fresh scratch directory holding a small synthetic tree under data/.
inline fs::path scratch(const std::string& name, std::size_t domains = 3, std::size_t images = 6,
                        std::size_t size = 32) {
  const auto dir = fs::temp_directory_path() / ("fsel_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  data::write_synth_tree(dir / "data", data::generate(domains, images, size, 17), 17);
  return dir;
}

/// Small but complete config; callers patch fields as needed.
inline io::Json tiny_config_json() {
  return io::Json::parse(R"({
    "data_root": "data",
    "out_dir": "out",
    "target": "d2_textured",
    "patch_size": 16,
    "patches_per_image": 4,
    "architecture": {"channels": [4, 4, 8]},
    "pretrain": {"epochs": 2, "lr": 0.003},
    "pseudo": {"epochs": 2, "lr": 0.003},
    "finetune": {"epochs": 2, "lr": 0.003},
    "scorers": ["consistency", "random"],
    "shots": [1],
    "n_splits": 2,
    "overlay_samples": 1
  })");
}

inline fs::path write_config(const fs::path& dir, const io::Json& j, const std::string& name = "config.json") {
  io::write_json(dir / name, j);
  return dir / name;
}

}  // namespace fsel::testing
