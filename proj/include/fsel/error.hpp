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

#include <stdexcept>
#include <string>
#include <utility>

namespace fsel {

/// Exception carrying a stable machine-readable code (e.g. "budget_exceeds_pool")
/// next to the human-readable message. The CLI serializes both into its error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

  /// Stage/dataset provenance, outermost first, joined with " / ".
  const std::string& context() const noexcept { return context_; }

  Error with_context(const std::string& ctx) const {
    Error e(code_, what());
    e.context_ = context_.empty() ? ctx : ctx + " / " + context_;
    return e;
  }

 private:
  std::string code_;
  std::string context_;
};

#define FSEL_CHECK(cond, code, msg)          \
  do {                                       \
    if (!(cond)) throw ::fsel::Error(code, msg); \
  } while (0)

}  // namespace fsel
