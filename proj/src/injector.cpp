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

#include "qnnfault/injector.hpp"

#include <algorithm>

#include "qnnfault/error.hpp"

namespace qnnfault {

FaultSpec::FaultSpec(int layer_, std::vector<int> channels_, std::int32_t level_)
    : layer(layer_), channels(std::move(channels_)), level(level_) {
  std::sort(channels.begin(), channels.end());
  channels.erase(std::unique(channels.begin(), channels.end()), channels.end());
}

std::string FaultSpec::key() const {
  std::string s = "L" + std::to_string(layer) + ":C";
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(channels[i]);
  }
  s += ":V" + std::to_string(level);
  return s;
}

void to_json(nlohmann::json& j, const FaultSpec& f) {
  j = nlohmann::json{{"layer", f.layer}, {"channels", f.channels}, {"level", f.level}};
}

void from_json(const nlohmann::json& j, FaultSpec& f) {
  f = FaultSpec(j.at("layer").get<int>(), j.at("channels").get<std::vector<int>>(),
                j.at("level").get<std::int32_t>());
}

void validate_fault(const QuantizedNetwork& net, const FaultSpec& fault) {
  if (fault.layer < 0 || fault.layer >= net.layer_count()) {
    throw UsageError("fault layer " + std::to_string(fault.layer) + " does not exist");
  }
  const Layer& l = net.layer(fault.layer);
  if (!l.thresholded()) {
    throw UsageError("layer " + std::to_string(fault.layer) +
                     " has no thresholds; faults target conv/fc activation stages");
  }
  if (fault.channels.empty()) throw UsageError("fault has no channels");
  if (!std::is_sorted(fault.channels.begin(), fault.channels.end()) ||
      std::adjacent_find(fault.channels.begin(), fault.channels.end()) != fault.channels.end()) {
    throw UsageError("fault channels must be sorted and unique");
  }
  if (fault.channels.front() < 0 || fault.channels.back() >= l.out_channels) {
    throw UsageError("fault channel out of range for layer " + std::to_string(fault.layer) +
                     " with " + std::to_string(l.out_channels) + " channels");
  }
  if (!net.quant().activations().contains(fault.level)) {
    throw UsageError("stuck level " + std::to_string(fault.level) + " is not legal for " +
                     net.quant().name());
  }
}

RowVector<std::int32_t> stuck_threshold_row(const QuantizedNetwork& net, int layer,
                                            std::int32_t level) {
  const int rank = net.quant().activations().rank_of(level);
  const auto th_max = static_cast<std::int32_t>(net.accumulator_bound(layer).th_max());
  RowVector<std::int32_t> row(net.quant().thresholds_per_channel());
  for (Eigen::Index i = 0; i < row.size(); ++i) row[i] = i < rank ? -th_max : th_max;
  return row;
}

InjectedNetwork inject(const QuantizedNetwork& net, const FaultSpec& fault) {
  validate_fault(net, fault);
  ThresholdMatrix thresholds = net.layer(fault.layer).thresholds;
  const RowVector<std::int32_t> stuck = stuck_threshold_row(net, fault.layer, fault.level);
  for (int c : fault.channels) thresholds.row(c) = stuck;
  QuantizedNetwork injected = net.with_thresholds(fault.layer, std::move(thresholds));
  return {net, fault, std::move(injected)};
}

ForcedNetwork::ForcedNetwork(QuantizedNetwork base, FaultSpec fault)
    : base_(std::move(base)), fault_(std::move(fault)) {
  validate_fault(base_, fault_);
}

void ForcedNetwork::force(int layer, FeatureMap& output) const {
  if (layer != fault_.layer) return;
  for (int c : fault_.channels) output.data.col(c).setConstant(fault_.level);
}

RowVector<std::int32_t> ForcedNetwork::scores(const FeatureMap& image) const {
  return qnnfault::scores(base_, image, [this](int layer, FeatureMap& out) { force(layer, out); });
}

int ForcedNetwork::infer(const FeatureMap& image) const { return argmax_class(scores(image)); }

std::vector<FeatureMap> ForcedNetwork::layer_outputs(const FeatureMap& image) const {
  std::vector<FeatureMap> outputs;
  qnnfault::scores(base_, image, [&](int layer, FeatureMap& out) {
    force(layer, out);
    outputs.push_back(out);
  });
  return outputs;
}

ForcedNetwork force_channel(const QuantizedNetwork& net, const FaultSpec& fault) {
  return {net, fault};
}

InjectionCheck verify_injection_equivalence(const QuantizedNetwork& net, const FaultSpec& fault,
                                            const LabeledDataset& data) {
  const InjectedNetwork injected = inject(net, fault);
  const ForcedNetwork forced = force_channel(net, fault);
  InjectionCheck check;
  check.fault = fault;
  check.images = data.size();
  for (int i = 0; i < data.size(); ++i) {
    const FeatureMap image = data.image(i, net.input_quant());
    if (qnnfault::infer(injected.network(), image) != forced.infer(image)) {
      check.mismatched_images.push_back(i);
    }
  }
  return check;
}

}  // namespace qnnfault
