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
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnnfault/accuracy_table.hpp"
#include "qnnfault/dataset.hpp"
#include "qnnfault/network.hpp"
#include "qnnfault/schedule.hpp"

namespace qnnfault {

/// Channels of one layer, the folding factor f and the accuracy table E
/// holding the correct count for every f-group sharing a faulty PE.
struct SchedulingInstance {
  AccuracyTable table;
  // Highest accuracy reachable with a faulty PE; defaults to the largest entry.
  std::optional<std::int64_t> m_acc;

  int channels() const { return table.channels(); }
  int folding() const { return table.group_size(); }
  std::int64_t bound() const { return m_acc ? *m_acc : table.max_entry(); }
  // UsageError unless f divides N and M_acc covers every entry.
  void validate() const;
};

struct WorstCase {
  std::int64_t min_acc = 0;
  int pe = -1;
  std::vector<int> group;
};

// Lowest E over the PEs of `schedule`; every PE must hold exactly f channels.
WorstCase worst_case_of_schedule(const Schedule& schedule, const AccuracyTable& table);

struct ScheduleSolution {
  Schedule schedule;
  std::int64_t min_acc = 0;
  std::vector<int> worst_group;
  bool optimal = false;
  // PEs reserved for replicated channels; excluded from min_acc.
  std::vector<int> protected_pes;
};

struct SolveOptions {
  double time_budget_seconds = 60;
};

// Maximizes the worst-case correct count over all partitions into f-groups.
// Ties go to the lexicographically smallest group list (groups sorted, PEs
// numbered by lowest channel). f = 2 is solved exactly in polynomial time;
// f > 2 by branch and bound, which reports optimal = false with the best
// partition found when the time budget runs out.
ScheduleSolution optimal_schedule(const SchedulingInstance& instance, const SolveOptions& options = {});

// Elementwise minimum of per-level tables of the same shape.
AccuracyTable combine_levels(const std::vector<AccuracyTable>& per_level);

// Solves over the channels not in `replicated`, then puts the replicated
// channels on dedicated PEs in ascending order. N - |replicated| must be a
// multiple of f.
ScheduleSolution schedule_with_replication(const SchedulingInstance& instance,
                                           const std::vector<int>& replicated,
                                           const SolveOptions& options = {});

/// Default-schedule statistics for one folding factor and stuck level.
struct FoldingPoint {
  int folding = 1;
  int pe_count = 1;
  std::int32_t level = 0;
  double average_correct = 0;
  std::int64_t min_correct = 0;
  std::int64_t max_correct = 0;
  std::int64_t total = 0;
};

// For every folding factor f, makes each PE of default_schedule(c, ceil(c/f))
// faulty in turn at each level.
std::vector<FoldingPoint> folding_sweep(const QuantizedNetwork& net, int layer, const LabeledDataset& data,
                                        const std::vector<int>& foldings,
                                        const std::vector<std::int32_t>& levels, int jobs = 1);

// folding,pe_count,level,average_accuracy,min_accuracy,max_accuracy,spread
std::string folding_csv(const std::vector<FoldingPoint>& points);

void to_json(nlohmann::json& j, const ScheduleSolution& s);

// Long-form heatmap of a pairwise table: i,j,correct,default,optimal where
// the last two flag pairs sharing a PE in the respective schedule.
std::string heatmap_csv(const AccuracyTable& table, const Schedule& default_sched, const Schedule& optimal);

}  // namespace qnnfault
