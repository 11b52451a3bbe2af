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

#include "qnnfault/replication.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "qnnfault/error.hpp"
#include "qnnfault/inference.hpp"

namespace qnnfault {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::int64_t OpsProfile::total() const {
  std::int64_t t = 0;
  for (const auto& l : layers) t += l.macs;
  return t;
}

const LayerOps& OpsProfile::of(int layer) const {
  for (const auto& l : layers) {
    if (l.layer == layer) return l;
  }
  throw UsageError("layer " + std::to_string(layer) + " has no multiply-accumulate operations");
}

OpsProfile ops_profile(const QuantizedNetwork& net) {
  OpsProfile p;
  for (int i = 0; i < net.layer_count(); ++i) {
    const Layer& l = net.layer(i);
    if (!l.has_weights()) continue;
    const Shape out = net.output_shape_of(i);
    LayerOps o;
    o.layer = i;
    o.kind = l.kind;
    o.channels = l.out_channels;
    o.macs = static_cast<std::int64_t>(out.pixels()) * l.fan_in() * l.out_channels;
    p.layers.push_back(o);
  }
  return p;
}

std::vector<ChannelRisk> channel_risks(const CampaignResult& result) {
  std::map<std::pair<int, int>, ChannelRisk> worst;
  for (const auto& r : result.records) {
    if (r.fault.channels.size() != 1) {
      throw UsageError("channel risks need a whole-channel campaign, found " + r.fault.key());
    }
    const std::pair<int, int> key{r.fault.layer, r.fault.channels.front()};
    auto [it, inserted] = worst.try_emplace(key, ChannelRisk{key.first, key.second, r.correct, r.fault.level});
    if (!inserted && r.correct < it->second.worst_correct) {
      it->second.worst_correct = r.correct;
      it->second.worst_level = r.fault.level;
    }
  }
  std::vector<ChannelRisk> out;
  out.reserve(worst.size());
  for (const auto& [k, v] : worst) out.push_back(v);
  return out;
}

double drop_percent(const CampaignResult& result, std::int64_t correct) {
  if (result.total <= 0) throw UsageError("campaign result has no evaluated images");
  return 100.0 * static_cast<double>(result.baseline - correct) / static_cast<double>(result.total);
}

ChannelSets critical_channels(const CampaignResult& result, double t) {
  ChannelSets out;
  for (const auto& r : channel_risks(result)) {
    if (drop_percent(result, r.worst_correct) > t) out[r.layer].push_back(r.channel);
  }
  return out;
}

std::size_t ReplicationPlan::channel_count() const {
  std::size_t n = 0;
  for (const auto& [l, c] : channels) n += c.size();
  return n;
}

bool ReplicationPlan::protects(int layer, int channel) const {
  const auto it = channels.find(layer);
  return it != channels.end() && std::binary_search(it->second.begin(), it->second.end(), channel);
}

ReplicationPlan plan_for_channels(ChannelSets channels, double threshold, const OpsProfile& ops) {
  ReplicationPlan p;
  p.threshold = threshold;
  p.total_ops = ops.total();
  if (p.total_ops <= 0) throw UsageError("operation profile is empty");
  for (auto it = channels.begin(); it != channels.end();) {
    auto& c = it->second;
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    if (c.empty()) {
      it = channels.erase(it);
      continue;
    }
    const LayerOps& l = ops.of(it->first);
    if (c.front() < 0 || c.back() >= l.channels) {
      throw UsageError("replicated channel out of range for layer " + std::to_string(it->first));
    }
    p.triplicated_ops += l.per_channel() * static_cast<std::int64_t>(c.size());
    ++it;
  }
  p.channels = std::move(channels);
  p.overhead_percent = 200.0 * static_cast<double>(p.triplicated_ops) / static_cast<double>(p.total_ops);
  return p;
}

ReplicationPlan plan_replication(const CampaignResult& result, double t, const OpsProfile& ops) {
  std::set<int> layers;
  std::set<std::int32_t> levels;
  std::set<FaultSpec> seen;
  for (const auto& r : result.records) {
    layers.insert(r.fault.layer);
    levels.insert(r.fault.level);
    seen.insert(r.fault);
  }
  for (int l : layers) {
    const int n = ops.of(l).channels;
    for (auto v : levels) {
      for (int c = 0; c < n; ++c) {
        if (!seen.count(FaultSpec(l, {c}, v))) {
          throw UsageError("campaign does not cover " + FaultSpec(l, {c}, v).key() +
                           "; replication planning needs every channel at every level");
        }
      }
    }
  }
  return plan_for_channels(critical_channels(result, t), t, ops);
}

ReplicationPlan full_tmr_plan(const OpsProfile& ops) {
  ChannelSets all;
  for (const auto& l : ops.layers) {
    auto& c = all[l.layer];
    for (int i = 0; i < l.channels; ++i) c.push_back(i);
  }
  return plan_for_channels(std::move(all), 0, ops);
}

void to_json(nlohmann::json& j, const ReplicationPlan& p) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& [l, c] : p.channels) layers.push_back({{"layer", l}, {"channels", c}});
  j = nlohmann::json{{"threshold_percent", p.threshold},
                     {"overhead_percent", p.overhead_percent},
                     {"triplicated_ops", p.triplicated_ops},
                     {"total_ops", p.total_ops},
                     {"layers", layers}};
}

void from_json(const nlohmann::json& j, ReplicationPlan& p) {
  p = ReplicationPlan{};
  p.threshold = j.at("threshold_percent").get<double>();
  p.overhead_percent = j.at("overhead_percent").get<double>();
  p.triplicated_ops = j.at("triplicated_ops").get<std::int64_t>();
  p.total_ops = j.at("total_ops").get<std::int64_t>();
  for (const auto& l : j.at("layers")) {
    p.channels[l.at("layer").get<int>()] = l.at("channels").get<std::vector<int>>();
  }
}

std::string replication_table_csv(const OpsProfile& ops, const std::vector<ReplicationPlan>& plans) {
  std::ostringstream out;
  out << "layer,type,channels";
  for (const auto& p : plans) out << ",>" << fixed(p.threshold, 2);
  out << '\n';
  for (const auto& l : ops.layers) {
    out << l.layer << ',' << to_string(l.kind) << ',' << l.channels;
    for (const auto& p : plans) {
      const auto it = p.channels.find(l.layer);
      out << ',' << (it == p.channels.end() ? 0 : it->second.size());
    }
    out << '\n';
  }
  out << "overhead,,";
  for (const auto& p : plans) out << ',' << fixed(p.overhead_percent, 2);
  out << '\n';
  return out.str();
}

ProtectedNetwork::ProtectedNetwork(QuantizedNetwork net, ReplicationPlan plan)
    : net_(std::move(net)), plan_(std::move(plan)) {
  for (const auto& [l, c] : plan_.channels) {
    if (l < 0 || l >= net_.layer_count() || !net_.layer(l).has_weights()) {
      throw UsageError("replication plan names layer " + std::to_string(l) + " which has no channels");
    }
    if (!c.empty() && (c.front() < 0 || c.back() >= net_.layer(l).out_channels)) {
      throw UsageError("replication plan channel out of range for layer " + std::to_string(l));
    }
  }
}

std::optional<FaultSpec> ProtectedNetwork::surviving_fault(const FaultSpec& fault) const {
  std::vector<int> left;
  for (int c : fault.channels) {
    if (!plan_.protects(fault.layer, c)) left.push_back(c);
  }
  if (left.empty()) return std::nullopt;
  return FaultSpec(fault.layer, std::move(left), fault.level);
}

Evaluation ProtectedNetwork::evaluate(const FaultSpec& fault, const LabeledDataset& data, int jobs) const {
  validate_fault(net_, fault);
  const auto f = surviving_fault(fault);
  if (!f) return qnnfault::evaluate(net_, data, jobs);
  return qnnfault::evaluate(inject(net_, *f).network(), data, jobs);
}

RunOptions::FaultFilter ProtectedNetwork::filter() const {
  return [this](const FaultSpec& f) { return surviving_fault(f); };
}

ProtectedNetwork apply_replication(const QuantizedNetwork& net, const ReplicationPlan& plan) {
  return {net, plan};
}

ReplicationCheck verify_replication(const ProtectedNetwork& protected_net, const LabeledDataset& data,
                                    const std::vector<std::int32_t>& levels, int jobs) {
  const QuantizedNetwork& net = protected_net.network();
  RunOptions options;
  options.jobs = jobs;
  options.fault_filter = protected_net.filter();
  const CampaignResult r = run_campaign(net, data, plan_whole_channel(net, levels), options);
  ReplicationCheck check;
  check.baseline = r.baseline;
  check.total = r.total;
  check.threshold = protected_net.plan().threshold;
  check.worst_correct = r.baseline;
  for (const auto& e : r.records) {
    if (e.correct < check.worst_correct) {
      check.worst_correct = e.correct;
      check.worst_fault = e.fault;
    }
  }
  check.worst_drop_percent = drop_percent(r, check.worst_correct);
  return check;
}

double hardware_cost(const ReplicationPlan& plan, const QuantSpec& precision) {
  const double protected_macs = static_cast<double>(plan.total_ops + 2 * plan.triplicated_ops);
  return protected_macs * 1.6 * precision.weight_bits * precision.act_bits;
}

std::vector<CostPoint> cost_curve(const CampaignResult& result, const OpsProfile& ops,
                                  const QuantSpec& precision) {
  const auto risks = channel_risks(result);
  std::set<double, std::greater<>> thresholds{0.0};
  for (const auto& r : risks) thresholds.insert(std::max(0.0, drop_percent(result, r.worst_correct)));
  std::vector<CostPoint> out;
  for (double t : thresholds) {
    const ReplicationPlan plan = plan_replication(result, t, ops);
    std::int64_t worst = result.baseline;
    for (const auto& r : risks) {
      if (!plan.protects(r.layer, r.channel)) worst = std::min(worst, r.worst_correct);
    }
    CostPoint p;
    p.precision = precision;
    p.threshold = t;
    p.worst_error_percent = 100.0 - result.accuracy_percent(worst);
    p.hardware_cost = hardware_cost(plan, precision);
    out.push_back(p);
  }
  return out;
}

std::vector<CostPoint> pareto_frontier(const std::vector<CostPoint>& points) {
  if (points.empty()) throw UsageError("Pareto frontier of an empty point set");
  std::vector<CostPoint> sorted = points;
  std::stable_sort(sorted.begin(), sorted.end(), [](const CostPoint& a, const CostPoint& b) {
    if (a.hardware_cost != b.hardware_cost) return a.hardware_cost < b.hardware_cost;
    return a.worst_error_percent < b.worst_error_percent;
  });
  std::vector<CostPoint> out;
  double best_error = 0;
  double cost_at_best = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const CostPoint& p = sorted[i];
    const bool dominated = i > 0 && (best_error < p.worst_error_percent ||
                                     (best_error == p.worst_error_percent && cost_at_best < p.hardware_cost));
    if (!dominated) out.push_back(p);
    if (i == 0 || p.worst_error_percent < best_error) {
      best_error = p.worst_error_percent;
      cost_at_best = p.hardware_cost;
    }
  }
  return out;
}

std::string cost_csv(const std::vector<CostPoint>& points) {
  std::ostringstream out;
  out << "precision,cost,worst_error\n";
  for (const auto& p : points) {
    out << p.precision.name() << ',' << fixed(p.hardware_cost, 1) << ',' << fixed(p.worst_error_percent, 4) << '\n';
  }
  return out.str();
}

std::vector<CostPoint> cost_points_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("precision,cost,worst_error", 0) != 0) {
    throw LoadError("cost CSV must start with the header precision,cost,worst_error");
  }
  std::vector<CostPoint> out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name, cost, error;
    if (!std::getline(ls, name, ',') || !std::getline(ls, cost, ',') || !std::getline(ls, error)) {
      throw LoadError("cost CSV row " + std::to_string(row) + " needs three columns");
    }
    CostPoint p;
    try {
      p.precision = QuantSpec::parse(name);
      p.hardware_cost = std::stod(cost);
      p.worst_error_percent = std::stod(error);
    } catch (const std::exception& e) {
      throw LoadError("cost CSV row " + std::to_string(row) + ": " + e.what());
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace qnnfault
