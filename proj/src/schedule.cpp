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

#include "qnnfault/schedule.hpp"

#include <string>

#include "qnnfault/error.hpp"

namespace qnnfault {

std::vector<std::vector<int>> Schedule::groups() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(pe_count));
  for (int c = 0; c < channel_count(); ++c) {
    out.at(static_cast<std::size_t>(assignment[static_cast<std::size_t>(c)])).push_back(c);
  }
  return out;
}

Schedule default_schedule(int out_channels, int pe_count, int layer_id) {
  if (out_channels < 1 || pe_count < 1 || pe_count > out_channels) {
    throw UsageError("need 1 <= pe_count <= channels, got " + std::to_string(pe_count) + " PEs for " +
                     std::to_string(out_channels) + " channels");
  }
  Schedule s;
  s.layer_id = layer_id;
  s.pe_count = pe_count;
  s.assignment.resize(static_cast<std::size_t>(out_channels));
  for (int c = 0; c < out_channels; ++c) s.assignment[static_cast<std::size_t>(c)] = c % pe_count;
  return s;
}

Schedule schedule_from_groups(const std::vector<std::vector<int>>& groups, int layer_id) {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.size();
  Schedule s;
  s.layer_id = layer_id;
  s.pe_count = static_cast<int>(groups.size());
  s.assignment.assign(n, -1);
  for (std::size_t pe = 0; pe < groups.size(); ++pe) {
    if (groups[pe].empty()) throw UsageError("PE " + std::to_string(pe) + " has no channels");
    for (int c : groups[pe]) {
      if (c < 0 || static_cast<std::size_t>(c) >= n || s.assignment[static_cast<std::size_t>(c)] != -1) {
        throw UsageError("groups do not partition the channels (channel " + std::to_string(c) + ")");
      }
      s.assignment[static_cast<std::size_t>(c)] = static_cast<int>(pe);
    }
  }
  return s;
}

}  // namespace qnnfault
