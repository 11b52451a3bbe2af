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

#include <vector>

namespace qnnfault {

/// Mapping of one layer's output channels onto its processing elements.
/// A PE computes its channels one after another, so the number of channels
/// per PE is the folding factor (cycles per output pixel).
struct Schedule {
  int layer_id = 0;
  int pe_count = 1;
  std::vector<int> assignment;  // channel -> PE

  int channel_count() const { return static_cast<int>(assignment.size()); }
  // Ceiling of channels / PEs; the last round is ragged when PEs do not divide channels.
  int folding_factor() const { return (channel_count() + pe_count - 1) / pe_count; }
  // Channels of each PE in ascending order.
  std::vector<std::vector<int>> groups() const;

  friend bool operator==(const Schedule&, const Schedule&) = default;
};

// Channel c runs on PE c mod pe_count.
Schedule default_schedule(int out_channels, int pe_count, int layer_id = 0);

// Builds a schedule from PE groups; throws UsageError unless the groups
// partition 0..n-1.
Schedule schedule_from_groups(const std::vector<std::vector<int>>& groups, int layer_id = 0);

}  // namespace qnnfault
