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
#include <string>
#include <vector>

#include "fsel/error.hpp"
#include "fsel/image.hpp"
#include "fsel/imaging/filters.hpp"
#include "fsel/parallel.hpp"

namespace fsel::pseudolabel {

enum class Method { Pipeline, KMeans };

inline const char* to_string(Method m) { return m == Method::Pipeline ? "pipeline" : "kmeans"; }

inline Method method_from_string(const std::string& s) {
  if (s == "pipeline") return Method::Pipeline;
  if (s == "kmeans") return Method::KMeans;
  throw Error("malformed_config", "pseudo-label method must be pipeline or kmeans, got '" + s + "'");
}

struct Item {
  std::string image_id;
  GrayImage image;
  BinaryMask mask;
};

struct PseudoLabeledSet {
  std::vector<Item> items;
  double gamma_used = 0.0;  // unused (0) for k-means
  Method method = Method::Pipeline;

  std::vector<BinaryMask> masks() const {
    std::vector<BinaryMask> out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back(it.mask);
    return out;
  }
};

struct NamedImage {
  std::string id;
  GrayImage image;
};

/// equalize -> threshold(gamma) -> 2x2 dilation.
inline BinaryMask pipeline_mask(const GrayImage& x, double gamma) {
  return imaging::dilate2x2(imaging::threshold(imaging::equalize(x), gamma));
}

inline PseudoLabeledSet generate_pipeline(const std::vector<NamedImage>& images, double gamma, unsigned threads = 1) {
  FSEL_CHECK(gamma >= 0.0 && gamma <= 1.0, "malformed_config", "gamma must lie in [0,1]");
  PseudoLabeledSet out{std::vector<Item>(images.size()), gamma, Method::Pipeline};
  parallel_for(images.size(), threads, [&](std::size_t i) {
    out.items[i] = {images[i].id, images[i].image, pipeline_mask(images[i].image, gamma)};
  });
  return out;
}

/// Two-centre Lloyd iterations on pixel values. Centres start at the min and
/// max value; equidistant pixels go to the darker centre. The darker cluster
/// is foreground.
inline BinaryMask kmeans_mask(const GrayImage& x, int max_iters = 100) {
  FSEL_CHECK(x.size() > 0, "constant_image", "k-means on empty image");
  const auto [lo, hi] = std::minmax_element(x.pixels.begin(), x.pixels.end());
  FSEL_CHECK(*hi > *lo, "constant_image", "k-means needs at least two distinct pixel values");
  double dark = *lo, bright = *hi;
  BinaryMask assign(x.height, x.width, 0);
  for (int it = 0; it < max_iters; ++it) {
    bool changed = it == 0;
    double sum_d = 0.0, sum_b = 0.0;
    std::size_t n_d = 0, n_b = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double v = x.pixels[i];
      const std::uint8_t a = std::abs(v - dark) <= std::abs(v - bright) ? 1 : 0;
      changed |= a != assign.pixels[i];
      assign.pixels[i] = a;
      if (a) {
        sum_d += v;
        ++n_d;
      } else {
        sum_b += v;
        ++n_b;
      }
    }
    if (!changed) break;
    if (n_d) dark = sum_d / static_cast<double>(n_d);
    if (n_b) bright = sum_b / static_cast<double>(n_b);
  }
  return assign;
}

inline PseudoLabeledSet generate_kmeans(const std::vector<NamedImage>& images, unsigned threads = 1) {
  PseudoLabeledSet out{std::vector<Item>(images.size()), 0.0, Method::KMeans};
  parallel_for(images.size(), threads, [&](std::size_t i) {
    try {
      out.items[i] = {images[i].id, images[i].image, kmeans_mask(images[i].image)};
    } catch (const Error& e) {
      throw e.with_context("image " + images[i].id);
    }
  });
  return out;
}

}  // namespace fsel::pseudolabel
