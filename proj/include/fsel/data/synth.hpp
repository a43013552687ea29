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
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "fsel/error.hpp"
#include "fsel/image.hpp"
#include "fsel/rng.hpp"

// Seeded multi-domain cell-image generator. Domain styles cycle through:
//   dark_cells   round dark cells on a bright, lightly noisy background
//   fluo_cells   bright blurred cells on a dark background (inverted polarity)
//   textured     dark elongated cells on a heavily textured mid-grey background
//   organelles   dark blobs plus unlabeled dark membrane lines of equal tone
namespace fsel::data {

enum class DomainStyle { DarkCells, FluoCells, Textured, Organelles };

inline const char* to_string(DomainStyle s) {
  switch (s) {
    case DomainStyle::DarkCells: return "dark_cells";
    case DomainStyle::FluoCells: return "fluo_cells";
    case DomainStyle::Textured: return "textured";
    case DomainStyle::Organelles: return "organelles";
  }
  return "?";
}

struct SynthSample {
  std::string id;
  GrayImage image;
  BinaryMask mask;
};

struct SynthDomain {
  std::string id;
  DomainStyle style = DomainStyle::DarkCells;
  double suggested_gamma = 0.5;
  std::vector<SynthSample> samples;
};

namespace detail {

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : state_(seed) {}
  double uniform() { return unit_double(next()); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {  // Box-Muller
    const double u1 = std::max(uniform(), 1e-300), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }

 private:
  std::uint64_t next() { return splitmix64(state_++); }
  std::uint64_t state_;
};

struct Ellipse {
  double cy, cx, ry, rx, angle;
  bool contains(double r, double c) const {
    const double dy = r - cy, dx = c - cx;
    const double u = dx * std::cos(angle) + dy * std::sin(angle);
    const double v = -dx * std::sin(angle) + dy * std::cos(angle);
    return (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0;
  }
};

inline GrayImage box_blur(const GrayImage& x) {
  GrayImage out(x.height, x.width);
  const long h = static_cast<long>(x.height), w = static_cast<long>(x.width);
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c) {
      double s = 0.0;
      for (long dr = -1; dr <= 1; ++dr)
        for (long dc = -1; dc <= 1; ++dc)
          s += x.at(std::clamp(r + dr, 0L, h - 1), std::clamp(c + dc, 0L, w - 1));
      out.at(r, c) = s / 9.0;
    }
  return out;
}

struct StyleParams {
  double background, cell, noise;
  double r_min, r_max, elongation;
  std::size_t cells_min, cells_max;
  std::size_t membranes;
  bool blur;
};

inline StyleParams style_params(DomainStyle s) {
  switch (s) {
    case DomainStyle::DarkCells: return {0.78, 0.22, 0.04, 3.0, 6.0, 1.0, 3, 7, 0, true};
    case DomainStyle::FluoCells: return {0.10, 0.80, 0.03, 4.0, 8.0, 1.2, 2, 5, 0, true};
    case DomainStyle::Textured: return {0.55, 0.18, 0.10, 3.0, 5.0, 2.0, 3, 7, 0, false};
    case DomainStyle::Organelles: return {0.70, 0.22, 0.04, 3.5, 6.5, 1.5, 2, 6, 3, true};
  }
  return {};
}

inline SynthSample render(DomainStyle style, const std::string& id, std::size_t size, Stream& rng) {
  const StyleParams sp = style_params(style);
  const double n = static_cast<double>(size);
  GrayImage clean(size, size, 0.0);
  BinaryMask mask(size, size, 0);
  BinaryMask dark(size, size, 0);

  const double gy = rng.uniform(-0.08, 0.08), gx = rng.uniform(-0.08, 0.08);
  for (std::size_t r = 0; r < size; ++r)
    for (std::size_t c = 0; c < size; ++c)
      clean.at(r, c) = sp.background + gy * (r / n - 0.5) + gx * (c / n - 0.5);

  for (std::size_t m = 0; m < sp.membranes; ++m) {
    // line through a random point with a random direction, ~2px thick
    const double py = rng.uniform(0, n), px = rng.uniform(0, n), t = rng.uniform(0, std::numbers::pi);
    for (std::size_t r = 0; r < size; ++r)
      for (std::size_t c = 0; c < size; ++c) {
        const double d = std::abs((r - py) * std::cos(t) - (c - px) * std::sin(t));
        if (d <= 1.0) {
          clean.at(r, c) = sp.cell;
          dark.at(r, c) = 1;
        }
      }
  }

  const std::size_t cells = sp.cells_min + rng.below(sp.cells_max - sp.cells_min + 1);
  for (std::size_t k = 0; k < cells; ++k) {
    const double rr = rng.uniform(sp.r_min, sp.r_max);
    const Ellipse e{rng.uniform(sp.r_max, n - sp.r_max), rng.uniform(sp.r_max, n - sp.r_max), rr,
                    rr * rng.uniform(1.0, sp.elongation), rng.uniform(0, std::numbers::pi)};
    const double tone = sp.cell + rng.uniform(-0.04, 0.04);
    for (std::size_t r = 0; r < size; ++r)
      for (std::size_t c = 0; c < size; ++c)
        if (e.contains(static_cast<double>(r), static_cast<double>(c))) {
          clean.at(r, c) = tone;
          mask.at(r, c) = 1;
          dark.at(r, c) = 1;
        }
  }

  GrayImage img = sp.blur ? box_blur(clean) : clean;
  for (auto& p : img.pixels) p = std::clamp(p + sp.noise * rng.normal(), 0.0, 1.0);
  return {id, std::move(img), std::move(mask)};
}

}  // namespace detail

inline DomainStyle style_for_index(std::size_t k) { return static_cast<DomainStyle>(k % 4); }

/// Suggested pseudo-label threshold: the mean fraction of pixels a viewer
/// would call "cell-dark", shrunk slightly to leave room for the dilation.
/// For the inverted-polarity style this is the cell fraction as well; the
/// dark-is-foreground pipeline is expected to do poorly there.
inline double suggest_gamma(const std::vector<SynthSample>& samples, DomainStyle style) {
  double frac = 0.0;
  for (const auto& s : samples) {
    std::size_t dark = 0;
    const double cut = (detail::style_params(style).cell + detail::style_params(style).background) / 2.0;
    const bool dark_cells = detail::style_params(style).cell < detail::style_params(style).background;
    for (std::size_t i = 0; i < s.image.size(); ++i)
      dark += dark_cells ? s.image.pixels[i] <= cut : s.mask.pixels[i];
    frac += static_cast<double>(dark) / static_cast<double>(s.image.size());
  }
  frac /= static_cast<double>(samples.size());
  return std::round(std::clamp(0.85 * frac, 0.01, 0.99) * 100.0) / 100.0;
}

/// Domain k of a seeded benchmark: images are named "<domain>_<index>".
inline SynthDomain generate_domain(std::size_t k, std::size_t images, std::size_t size, std::uint64_t seed) {
  FSEL_CHECK(images >= 1 && size >= 8, "malformed_config", "synthetic domain needs >= 1 image of size >= 8");
  SynthDomain d;
  d.style = style_for_index(k);
  d.id = "d" + std::to_string(k) + "_" + to_string(d.style);
  detail::Stream rng(hash_combine(seed, k));
  for (std::size_t i = 0; i < images; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%s_%03zu", d.id.c_str(), i);
    d.samples.push_back(detail::render(d.style, name, size, rng));
  }
  d.suggested_gamma = suggest_gamma(d.samples, d.style);
  return d;
}

inline std::vector<SynthDomain> generate(std::size_t domains, std::size_t images_per_domain, std::size_t size,
                                         std::uint64_t seed) {
  FSEL_CHECK(domains >= 2, "malformed_config", "synth-gen needs at least two domains");
  std::vector<SynthDomain> out;
  for (std::size_t k = 0; k < domains; ++k) out.push_back(generate_domain(k, images_per_domain, size, seed));
  return out;
}

}  // namespace fsel::data
