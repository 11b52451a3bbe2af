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
#include <vector>

#include "qnnfault/dataset.hpp"
#include "qnnfault/network.hpp"

namespace qnnfault {

struct LayerDescriptor {
  LayerKind kind = LayerKind::fc;
  int out_channels = 0;  // ignored for maxpool
  int kernel = 3;
  int stride = 1;
  int pad = 0;

  static LayerDescriptor conv(int out, int kernel = 3, int stride = 1, int pad = 0) {
    return {LayerKind::conv, out, kernel, stride, pad};
  }
  static LayerDescriptor fc(int out) { return {LayerKind::fc, out, 1, 1, 0}; }
  static LayerDescriptor pool(int kernel = 2, int stride = 2) {
    return {LayerKind::maxpool, 0, kernel, stride, 0};
  }
};

/// Recipe for a pseudo-random network. Weights are uniform over the legal
/// weight levels. Each channel's thresholds are distinct integers drawn
/// uniformly from [-r, r], r = ceil(spread * sqrt(fan_in) * max|w| * max|x|)
/// clipped to the accumulator bound, then sorted.
struct SyntheticModelSpec {
  std::uint64_t seed = 1;
  std::string name = "synthetic";
  QuantSpec quant;
  InputQuant input_quant;
  Shape input_shape;
  std::vector<LayerDescriptor> topology;  // last entry is the fc classifier
  double threshold_spread = 0.5;
  // Re-seeds (seed + attempt) until random images do not all classify alike.
  int max_attempts = 32;
};

QuantizedNetwork generate_synthetic(const SyntheticModelSpec& spec);

// Random raw images. A label equals the network's prediction with
// probability `label_agreement`, otherwise it is a uniformly random class.
LabeledDataset generate_dataset(const QuantizedNetwork& net, int count, std::uint64_t seed,
                                double label_agreement = 0.8);

// Raw images only, labels all zero.
LabeledDataset random_images(const Shape& shape, int count, std::uint64_t seed);

/// Preset topologies.
// Input 8x8x3: conv16 (pad 1), pool, conv32 (pad 1), pool, fc32, fc10.
SyntheticModelSpec desk_spec(QuantSpec quant, std::uint64_t seed = 1);
// CNV: 32x32x3 input, conv 64,64,pool,128,128,pool,256,256, fc 512,512,10.
SyntheticModelSpec cnv_spec(QuantSpec quant, std::uint64_t seed = 1);
// LFC: 28x28x1 input, fc 1024,1024,1024,10.
SyntheticModelSpec lfc_spec(QuantSpec quant, std::uint64_t seed = 1);
// Input 4x4x2: conv4 (k3), fc 3, fc 2. Small enough for exhaustive checks.
SyntheticModelSpec toy_spec(QuantSpec quant, std::uint64_t seed = 1);

}  // namespace qnnfault
