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

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "fsel/error.hpp"
#include "fsel/nn/model.hpp"

// Checkpoint layout (all little-endian):
//   "FSELNET1" | u32 version | u32 layer count | per layer u32 kind, kernel, in, out
//   | f64 dropout_p | per tensor: u32 rank, u32 dims..., f64 payload
namespace fsel::nn {

inline constexpr char kCheckpointMagic[8] = {'F', 'S', 'E', 'L', 'N', 'E', 'T', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& os, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw Error("corrupt_checkpoint", "truncated checkpoint");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw Error("corrupt_checkpoint", "truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const ModelParams& p) {
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_u32(os, kCheckpointVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(p.arch.size()));
  for (const auto& l : p.arch) {
    detail::put_u32(os, static_cast<std::uint32_t>(l.kind));
    detail::put_u32(os, l.kernel);
    detail::put_u32(os, l.in);
    detail::put_u32(os, l.out);
  }
  detail::put_f64(os, p.dropout_p);
  for (const auto& t : p.weights) {
    detail::put_u32(os, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) detail::put_u32(os, static_cast<std::uint32_t>(d));
    for (double v : t.data) detail::put_f64(os, v);
  }
}

inline ModelParams read_checkpoint(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw Error("corrupt_checkpoint", "bad checkpoint magic");
  const auto version = detail::get_u32(is);
  FSEL_CHECK(version == kCheckpointVersion, "corrupt_checkpoint",
             "unsupported checkpoint version " + std::to_string(version));
  const auto layers = detail::get_u32(is);
  FSEL_CHECK(layers > 0 && layers < 4096, "corrupt_checkpoint", "implausible layer count");
  Architecture arch(layers);
  for (auto& l : arch) {
    const auto kind = detail::get_u32(is);
    FSEL_CHECK(kind <= static_cast<std::uint32_t>(LayerKind::Dropout), "corrupt_checkpoint", "unknown layer kind");
    l.kind = static_cast<LayerKind>(kind);
    l.kernel = detail::get_u32(is);
    l.in = detail::get_u32(is);
    l.out = detail::get_u32(is);
  }
  const double dropout_p = detail::get_f64(is);
  ModelParams p = zero_params(std::move(arch), dropout_p);
  for (auto& t : p.weights) {
    const auto rank = detail::get_u32(is);
    FSEL_CHECK(rank == t.shape.size(), "corrupt_checkpoint", "tensor rank does not match architecture");
    for (auto d : t.shape)
      FSEL_CHECK(detail::get_u32(is) == d, "corrupt_checkpoint", "tensor dims do not match architecture");
    for (double& v : t.data) v = detail::get_f64(is);
  }
  return p;
}

inline void save_checkpoint(const std::string& path, const ModelParams& p) {
  std::ofstream os(path, std::ios::binary);
  FSEL_CHECK(os, "unwritable_output", "cannot write checkpoint " + path);
  write_checkpoint(os, p);
  FSEL_CHECK(os.good(), "unwritable_output", "failed writing checkpoint " + path);
}

inline ModelParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  FSEL_CHECK(is, "missing_artifact", "checkpoint not found: " + path);
  return read_checkpoint(is);
}

}  // namespace fsel::nn
