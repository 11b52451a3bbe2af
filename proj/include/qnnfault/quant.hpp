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

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace qnnfault {

/// Symmetric integer level set of a `bits`-wide quantizer.
///
/// One bit encodes the binary set {-1, +1}. Wider quantizers use the
/// 2^bits - 1 consecutive integers -(2^(bits-1)-1) ... +(2^(bits-1)-1), so
/// zero is always representable and the code with all bits set is unused.
class LevelSet {
 public:
  explicit LevelSet(int bits);

  int bits() const { return bits_; }
  std::int32_t max_magnitude() const { return bits_ == 1 ? 1 : (1 << (bits_ - 1)) - 1; }
  std::int32_t min_level() const { return -max_magnitude(); }
  std::int32_t max_level() const { return max_magnitude(); }
  int size() const { return bits_ == 1 ? 2 : 2 * max_magnitude() + 1; }

  bool contains(std::int32_t v) const;

  // Level reached when `count` thresholds fired; count in [0, size()-1].
  std::int32_t level_at(int count) const {
    return bits_ == 1 ? (count == 0 ? -1 : 1) : min_level() + count;
  }

  // Inverse of level_at. Throws UsageError for illegal levels.
  int rank_of(std::int32_t level) const;

  std::vector<std::int32_t> levels() const;

 private:
  int bits_;
};

/// W<w>A<a> precision of a network.
struct QuantSpec {
  int weight_bits = 1;
  int act_bits = 1;

  LevelSet weights() const { return LevelSet(weight_bits); }
  LevelSet activations() const { return LevelSet(act_bits); }

  // Thresholds per channel of a thresholded layer: one per activation step.
  int thresholds_per_channel() const { return activations().size() - 1; }

  std::string name() const;  // "W1A2"
  static QuantSpec parse(std::string_view name);

  friend bool operator==(const QuantSpec&, const QuantSpec&) = default;
};

/// Maps raw signed 8-bit pixels onto the levels consumed by the first layer.
///
/// bits == 1:  level = raw >= zero_point ? +1 : -1
/// bits >= 2:  level = clamp((raw - zero_point) >> shift, -m, +m)
///             with m = 2^(bits-1) - 1 and an arithmetic right shift.
struct InputQuant {
  int bits = 8;
  std::int32_t zero_point = 0;
  int shift = 0;

  LevelSet levels() const { return LevelSet(bits); }
  std::int32_t apply(std::int8_t raw) const;

  friend bool operator==(const InputQuant&, const InputQuant&) = default;
};

}  // namespace qnnfault
