// Copyright 2026 The qnnfault Authors
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

#include "qnnfault/quant.hpp"

#include <algorithm>
#include <cstdio>

#include "qnnfault/error.hpp"

namespace qnnfault {

LevelSet::LevelSet(int bits) : bits_(bits) {
  if (bits < 1 || bits > 8) {
    throw UsageError("quantizer bit width must be in [1, 8], got " + std::to_string(bits));
  }
}

bool LevelSet::contains(std::int32_t v) const {
  if (bits_ == 1) return v == -1 || v == 1;
  return v >= min_level() && v <= max_level();
}

int LevelSet::rank_of(std::int32_t level) const {
  if (!contains(level)) {
    throw UsageError("level " + std::to_string(level) + " is not legal for a " +
                     std::to_string(bits_) + "-bit quantizer");
  }
  if (bits_ == 1) return level < 0 ? 0 : 1;
  return level - min_level();
}

std::vector<std::int32_t> LevelSet::levels() const {
  std::vector<std::int32_t> out;
  out.reserve(size());
  for (int r = 0; r < size(); ++r) out.push_back(level_at(r));
  return out;
}

std::string QuantSpec::name() const {
  return "W" + std::to_string(weight_bits) + "A" + std::to_string(act_bits);
}

QuantSpec QuantSpec::parse(std::string_view name) {
  int w = 0, a = 0;
  char tail = 0;
  const std::string text(name);
  if (std::sscanf(text.c_str(), "W%dA%d%c", &w, &a, &tail) != 2) {
    throw UsageError("precision '" + text + "' is not of the form W<bits>A<bits>");
  }
  QuantSpec q{w, a};
  q.weights();
  q.activations();
  return q;
}

std::int32_t InputQuant::apply(std::int8_t raw) const {
  const std::int32_t centered = static_cast<std::int32_t>(raw) - zero_point;
  if (bits == 1) return centered >= 0 ? 1 : -1;
  const std::int32_t m = levels().max_magnitude();
  return std::clamp<std::int32_t>(centered >> shift, -m, m);
}

}  // namespace qnnfault
