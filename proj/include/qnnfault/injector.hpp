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

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnnfault/dataset.hpp"
#include "qnnfault/inference.hpp"
#include "qnnfault/network.hpp"

namespace qnnfault {

/// A set of output channels of one layer, all stuck at one activation level.
/// `channels` is kept sorted and duplicate-free.
struct FaultSpec {
  int layer = 0;
  std::vector<int> channels;
  std::int32_t level = 0;

  FaultSpec() = default;
  FaultSpec(int layer, std::vector<int> channels, std::int32_t level);

  // Canonical text key, e.g. "L0:C1,33:V-1".
  std::string key() const;

  friend auto operator<=>(const FaultSpec&, const FaultSpec&) = default;
  friend bool operator==(const FaultSpec&, const FaultSpec&) = default;
};

void to_json(nlohmann::json& j, const FaultSpec& f);
void from_json(const nlohmann::json& j, FaultSpec& f);

// Throws UsageError unless `fault` targets existing output channels of a
// thresholded layer with a legal activation level.
void validate_fault(const QuantizedNetwork& net, const FaultSpec& fault);

// Threshold row forcing `level`: the first rank(level) entries at -th_max,
// the rest at +th_max.
RowVector<std::int32_t> stuck_threshold_row(const QuantizedNetwork& net, int layer,
                                            std::int32_t level);

/// A network whose faulty channels have rewritten thresholds; weights and
/// every other threshold row are shared with / equal to the base.
class InjectedNetwork {
 public:
  InjectedNetwork(QuantizedNetwork base, FaultSpec fault, QuantizedNetwork injected)
      : base_(std::move(base)), fault_(std::move(fault)), injected_(std::move(injected)) {}

  const QuantizedNetwork& base() const { return base_; }
  const FaultSpec& fault() const { return fault_; }
  const QuantizedNetwork& network() const { return injected_; }

 private:
  QuantizedNetwork base_;
  FaultSpec fault_;
  QuantizedNetwork injected_;
};

InjectedNetwork inject(const QuantizedNetwork& net, const FaultSpec& fault);

/// Validation oracle: runs the unmodified network and overwrites every
/// pixel of the faulty channels with the stuck level right after the faulty
/// layer, never touching thresholds.
class ForcedNetwork {
 public:
  ForcedNetwork(QuantizedNetwork base, FaultSpec fault);

  const QuantizedNetwork& base() const { return base_; }
  const FaultSpec& fault() const { return fault_; }

  RowVector<std::int32_t> scores(const FeatureMap& image) const;
  int infer(const FeatureMap& image) const;
  // Output of every non-final layer, with forcing applied.
  std::vector<FeatureMap> layer_outputs(const FeatureMap& image) const;

 private:
  void force(int layer, FeatureMap& output) const;

  QuantizedNetwork base_;
  FaultSpec fault_;
};

ForcedNetwork force_channel(const QuantizedNetwork& net, const FaultSpec& fault);

struct InjectionCheck {
  FaultSpec fault;
  int images = 0;
  std::vector<int> mismatched_images;

  bool equivalent() const { return mismatched_images.empty(); }
};

// Classifies every dataset image with both injection mechanisms.
InjectionCheck verify_injection_equivalence(const QuantizedNetwork& net, const FaultSpec& fault,
                                            const LabeledDataset& data);

}  // namespace qnnfault
