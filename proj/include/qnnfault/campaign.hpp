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
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qnnfault/accuracy_table.hpp"
#include "qnnfault/dataset.hpp"
#include "qnnfault/injector.hpp"
#include "qnnfault/network.hpp"

namespace qnnfault {

enum class CampaignMode { whole_channel, pe_combinations, custom };

std::string_view to_string(CampaignMode mode);
CampaignMode campaign_mode_from_string(std::string_view s);

/// An ordered list of injection experiments against one network.
struct CampaignPlan {
  CampaignMode mode = CampaignMode::whole_channel;
  std::string network_name;
  std::uint32_t network_checksum = 0;
  std::vector<int> layers;
  std::vector<std::int32_t> levels;
  int group_size = 1;  // channels per experiment (the folding factor for pe_combinations)
  std::vector<FaultSpec> experiments;

  std::size_t size() const { return experiments.size(); }
  // CRC-32 over the canonical plan: mode, network checksum and every experiment key.
  std::uint32_t hash() const;
};

// Every legal activation level, ascending.
std::vector<std::int32_t> all_levels(const QuantizedNetwork& net);

// One experiment per (layer, level, channel), in that nesting order. Empty
// `layers` selects every thresholded layer.
CampaignPlan plan_whole_channel(const QuantizedNetwork& net, std::vector<std::int32_t> levels,
                                std::vector<int> layers = {});

// Closed-form size of plan_whole_channel: sum of out channels times |levels|.
std::uint64_t whole_channel_count(const QuantizedNetwork& net, std::size_t level_count,
                                  const std::vector<int>& layers = {});

// Every f-subset of the layer's channels at every level; C(c, f) * |levels|
// experiments, subsets in lexicographic order within each level.
CampaignPlan plan_pe_combinations(const QuantizedNetwork& net, int layer, int f,
                                  std::vector<std::int32_t> levels);

// Arbitrary fault list, e.g. the PE groups of one schedule.
CampaignPlan plan_custom(const QuantizedNetwork& net, std::vector<FaultSpec> experiments);

struct ExperimentResult {
  FaultSpec fault;
  std::int64_t correct = 0;
};

/// Correct-classification counts per experiment, in plan order.
struct CampaignResult {
  std::uint32_t plan_hash = 0;
  CampaignMode mode = CampaignMode::whole_channel;
  std::string network_name;
  std::int64_t total = 0;     // images evaluated per experiment
  std::int64_t baseline = 0;  // fault-free correct count
  std::size_t planned = 0;
  std::vector<ExperimentResult> records;
  double elapsed_seconds = 0;

  bool complete() const { return records.size() == planned; }
  std::optional<std::int64_t> find(const FaultSpec& fault) const;
  double accuracy_percent(std::int64_t correct) const {
    return total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total);
  }
  void add(ExperimentResult r);

 private:
  std::map<FaultSpec, std::size_t> index_;
};

struct RunOptions {
  int jobs = 1;
  // Append-only result store. Empty keeps results in memory only.
  std::filesystem::path store;
  // Continue an existing store instead of starting over.
  bool resume = false;
  // Maps a planned fault onto the fault actually seen by the network;
  // nullopt means the fault is fully masked. Used for protected networks.
  using FaultFilter = std::function<std::optional<FaultSpec>(const FaultSpec&)>;
  FaultFilter fault_filter;
  // Stop after this many newly executed experiments (< 0: run to the end).
  std::int64_t stop_after = -1;
  int batch_size = 64;
  std::function<void(std::size_t done, std::size_t planned)> progress;
};

// Executes the plan on `data`. Results are identical for any `jobs` value
// and across interrupted/resumed runs. Throws UsageError when resuming a
// store written for a different plan or dataset.
CampaignResult run_campaign(const QuantizedNetwork& net, const LabeledDataset& data,
                            const CampaignPlan& plan, const RunOptions& options = {});

// Reads a result store (complete or not).
CampaignResult load_campaign_result(const std::filesystem::path& store);

/// min/max over the experiments of one (layer, level); layer -1 aggregates
/// the whole network.
struct SummaryRow {
  int layer = -1;
  std::int32_t level = 0;
  std::int64_t min_correct = 0;
  std::vector<int> min_channels;
  int min_layer = -1;
  std::int64_t max_correct = 0;
  std::vector<int> max_channels;
  int max_layer = -1;
  std::size_t experiments = 0;
};

struct CampaignSummary {
  std::int64_t total = 0;
  std::int64_t baseline = 0;
  std::vector<SummaryRow> rows;  // per-layer rows, then network-wide rows
};

CampaignSummary summarize(const CampaignResult& result);

// CSV writers. Accuracies are percentages with two decimals.
//   results: layer,channels,level,correct,total,accuracy
//   summary: layer,level,baseline_correct,min_correct,min_layer,min_channels,
//            max_correct,max_layer,max_channels,total,baseline_accuracy,
//            min_accuracy,max_accuracy
std::string results_csv(const CampaignResult& result);
std::string summary_csv(const CampaignSummary& summary);

// One text row: "<name> <baseline> <min max per level ...>", "--" for absent levels.
std::string table_row(const CampaignSummary& summary, const std::string& name,
                      const std::vector<std::int32_t>& levels);

// Accuracy table of one layer and level from a campaign covering every
// `group_size`-subset of the layer's channels. Throws StructuralError if any
// entry is missing.
AccuracyTable build_accuracy_matrix(const CampaignResult& result, int layer, std::int32_t level,
                                    int channels, int group_size);

}  // namespace qnnfault
