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
#include <cstddef>
#include <string>
#include <vector>

#include "fsel/error.hpp"
#include "fsel/image.hpp"

namespace fsel::imaging {

/// Window count along one axis for a given stride.
inline std::size_t windows_along(std::size_t extent, std::size_t size, std::size_t stride) {
  return (extent - size) / stride + 1;
}

/// Deterministic grid of size x size crops. Picks the coarsest uniform stride
/// whose grid still holds at least count_target windows, enumerates the grid
/// row-major and keeps the first count_target entries.
inline std::vector<PatchRef> extract_patches(const std::string& image_id, std::size_t height, std::size_t width,
                                             std::size_t size, std::size_t count_target) {
  FSEL_CHECK(size > 0 && height >= size && width >= size, "image_too_small",
             image_id + ": " + std::to_string(height) + "x" + std::to_string(width) + " smaller than patch size " +
                 std::to_string(size));
  FSEL_CHECK(count_target >= 1, "invalid_patch_count", "count_target must be at least 1");
  const std::size_t max_stride = std::max<std::size_t>({height - size, width - size, 1});
  std::size_t stride = 0;
  for (std::size_t s = max_stride; s >= 1; --s)
    if (windows_along(height, size, s) * windows_along(width, size, s) >= count_target) {
      stride = s;
      break;
    }
  FSEL_CHECK(stride > 0, "too_few_windows",
             image_id + ": cannot place " + std::to_string(count_target) + " patches of size " + std::to_string(size));
  const std::size_t rows = windows_along(height, size, stride), cols = windows_along(width, size, stride);
  std::vector<PatchRef> out;
  out.reserve(count_target);
  for (std::size_t i = 0; i < rows && out.size() < count_target; ++i)
    for (std::size_t j = 0; j < cols && out.size() < count_target; ++j)
      out.push_back({image_id, i * stride, j * stride, size});
  return out;
}

inline std::vector<PatchRef> extract_patches(const std::string& image_id, const GrayImage& x, std::size_t size,
                                             std::size_t count_target) {
  return extract_patches(image_id, x.height, x.width, size, count_target);
}

}  // namespace fsel::imaging
