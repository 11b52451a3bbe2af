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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnnfault/campaign.hpp"
#include "qnnfault/network.hpp"

namespace qnnfault {

/// Multiply-accumulate count of one conv/fc layer.
struct LayerOps {
  int layer = 0;
  LayerKind kind = LayerKind::conv;
  int channels = 0;
  std::int64_t macs = 0;  // conv: out_h*out_w*k*k*in_ch*out_ch, fc: in*out

  std::int64_t per_channel() const { return macs / channels; }
};

struct OpsProfile {
  std::vector<LayerOps> layers;  // every conv/fc layer, classifier head included

  std::int64_t total() const;
  const LayerOps& of(int layer) const;  // UsageError if absent
};

OpsProfile ops_profile(const QuantizedNetwork& net);

// layer -> sorted channel indices
using ChannelSets = std::map<int, std::vector<int>>;

/// Worst (lowest) correct count of one channel over all injected levels.
struct ChannelRisk {
  int layer = 0;
  int channel = 0;
  std::int64_t worst_correct = 0;
  std::int32_t worst_level = 0;
};

// One entry per channel of a whole-channel campaign, ordered by (layer, channel).
// Throws UsageError for multi-channel experiments.
std::vector<ChannelRisk> channel_risks(const CampaignResult& result);

// Accuracy drop in percentage points caused by a correct count.
double drop_percent(const CampaignResult& result, std::int64_t correct);

// Channels whose worst drop is strictly greater than `t` percentage points.
ChannelSets critical_channels(const CampaignResult& result, double t);

struct ReplicationPlan {
  double threshold = 0;  // percentage points
  ChannelSets channels;
  std::int64_t triplicated_ops = 0;
  std::int64_t total_ops = 0;
  double overhead_percent = 0;  // 200 * triplicated_ops / total_ops

  std::size_t channel_count() const;
  bool protects(int layer, int channel) const;
};

ReplicationPlan plan_for_channels(ChannelSets channels, double threshold, const OpsProfile& ops);

// Requires the campaign to cover every channel of its layers at every level
// it used; throws UsageError otherwise.
ReplicationPlan plan_replication(const CampaignResult& result, double t, const OpsProfile& ops);

// Every channel of every conv/fc layer, head included: overhead 200%.
ReplicationPlan full_tmr_plan(const OpsProfile& ops);

void to_json(nlohmann::json& j, const ReplicationPlan& p);
void from_json(const nlohmann::json& j, ReplicationPlan& p);

// Channel counts per layer for several thresholds plus the overhead row:
//   layer,type,channels,<t1>,<t2>,...
//   overhead,,,<o1>,<o2>,...
std::string replication_table_csv(const OpsProfile& ops, const std::vector<ReplicationPlan>& plans);

/// Network whose triplicated channels mask any single fault.
class ProtectedNetwork {
 public:
  ProtectedNetwork(QuantizedNetwork net, ReplicationPlan plan);

  const QuantizedNetwork& network() const { return net_; }
  const ReplicationPlan& plan() const { return plan_; }

  // Fault seen after majority voting: protected channels drop out, nullopt
  // when nothing remains.
  std::optional<FaultSpec> surviving_fault(const FaultSpec& fault) const;
  Evaluation evaluate(const FaultSpec& fault, const LabeledDataset& data, int jobs = 1) const;
  RunOptions::FaultFilter filter() const;

 private:
  QuantizedNetwork net_;
  ReplicationPlan plan_;
};

ProtectedNetwork apply_replication(const QuantizedNetwork& net, const ReplicationPlan& plan);

struct ReplicationCheck {
  std::int64_t baseline = 0;
  std::int64_t total = 0;
  std::int64_t worst_correct = 0;
  std::optional<FaultSpec> worst_fault;
  double worst_drop_percent = 0;
  double threshold = 0;

  bool holds() const { return worst_drop_percent <= threshold; }
};

// Re-runs a whole-channel campaign over `levels` against the protected network.
ReplicationCheck verify_replication(const ProtectedNetwork& protected_net, const LabeledDataset& data,
                                    const std::vector<std::int32_t>& levels, int jobs = 1);

struct CostPoint {
  QuantSpec precision;
  double threshold = 0;
  double worst_error_percent = 0;  // 100 - worst single-fault accuracy
  double hardware_cost = 0;        // protected MACs * 1.6 * w * a
};

double hardware_cost(const ReplicationPlan& plan, const QuantSpec& precision);

// One point per distinct channel drop (clipped at 0), from no protection
// down to protecting every harmful channel.
std::vector<CostPoint> cost_curve(const CampaignResult& result, const OpsProfile& ops,
                                  const QuantSpec& precision);

// Non-dominated points sorted by cost, then error. Throws UsageError on
// empty input.
std::vector<CostPoint> pareto_frontier(const std::vector<CostPoint>& points);

// precision,cost,worst_error
std::string cost_csv(const std::vector<CostPoint>& points);
std::vector<CostPoint> cost_points_from_csv(const std::string& text);

}  // namespace qnnfault
