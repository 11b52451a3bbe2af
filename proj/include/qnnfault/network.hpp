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
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "qnnfault/quant.hpp"
#include "qnnfault/tensor.hpp"

namespace qnnfault {

enum class LayerKind { conv, fc, maxpool };

std::string_view to_string(LayerKind kind);
LayerKind layer_kind_from_string(std::string_view s);

/// One layer of a dataflow network.
///
/// conv:    weights are out_channels x (kernel * kernel * in_channels), the
///          fan-in ordered (ky, kx, c). Padding inserts zeros.
/// fc:      weights are out_channels x in_channels, where in_channels is the
///          flattened size of the incoming feature map.
/// maxpool: kernel x kernel window, stride `stride`, on activation levels.
///
/// conv/fc layers carry one ascending threshold row per output channel,
/// except the classifier head which has zero threshold columns and emits raw
/// accumulator scores.
struct Layer {
  LayerKind kind = LayerKind::fc;
  int kernel = 1;
  int stride = 1;
  int pad = 0;
  int in_channels = 0;
  int out_channels = 0;
  // Shared so that networks differing only in thresholds (injected variants)
  // reuse one weight buffer.
  std::shared_ptr<const WeightMatrix> weights;
  ThresholdMatrix thresholds;

  bool has_weights() const { return kind != LayerKind::maxpool; }
  bool thresholded() const { return has_weights() && thresholds.cols() > 0; }
  int fan_in() const {
    return kind == LayerKind::conv ? kernel * kernel * in_channels : in_channels;
  }
  std::int64_t weight_count() const {
    return has_weights() ? static_cast<std::int64_t>(out_channels) * fan_in() : 0;
  }

  static Layer make_conv(int in_channels, int out_channels, int kernel, int stride, int pad,
                         WeightMatrix weights, ThresholdMatrix thresholds);
  static Layer make_fc(int in_n, int out_n, WeightMatrix weights, ThresholdMatrix thresholds);
  static Layer make_maxpool(int channels, int kernel = 2, int stride = 2);
};

Shape output_shape(const Layer& layer, const Shape& input);

/// Largest |accumulator| a layer can produce given the magnitudes of its
/// weight and input levels; th_max = bound + 1 is unreachable.
struct AccumulatorBound {
  int layer_id = 0;
  std::int64_t bound = 0;

  std::int64_t th_max() const { return bound + 1; }
};

AccumulatorBound accumulator_bound(const Layer& layer, std::int32_t max_weight,
                                   std::int32_t max_input, int layer_id = 0);

/// An immutable, validated quantized network.
///
/// Construction enforces every structural invariant: shapes compose, weights
/// are legal levels, thresholds are strictly ascending with the count the
/// activation precision requires, and the final layer is an unthresholded
/// fully-connected classifier. No invalid network object can exist.
class QuantizedNetwork {
 public:
  QuantizedNetwork(std::string name, QuantSpec quant, InputQuant input_quant, Shape input_shape,
                   std::vector<Layer> layers, std::string provenance = {});

  const std::string& name() const { return name_; }
  const std::string& provenance() const { return provenance_; }
  const QuantSpec& quant() const { return quant_; }
  const InputQuant& input_quant() const { return input_quant_; }
  const Shape& input_shape() const { return shapes_.front(); }
  const std::vector<Layer>& layers() const { return layers_; }
  const Layer& layer(int i) const { return layers_.at(static_cast<std::size_t>(i)); }
  int layer_count() const { return static_cast<int>(layers_.size()); }

  const Shape& input_shape_of(int layer) const { return shapes_.at(static_cast<std::size_t>(layer)); }
  const Shape& output_shape_of(int layer) const {
    return shapes_.at(static_cast<std::size_t>(layer) + 1);
  }
  int class_count() const { return layers_.back().out_channels; }

  // Magnitude of the largest level entering `layer` (input quantizer for the
  // first layer, activation quantizer otherwise).
  std::int32_t input_magnitude(int layer) const;
  AccumulatorBound accumulator_bound(int layer) const;

  // Indices of conv/fc layers with thresholds: the injectable layers.
  std::vector<int> thresholded_layers() const;

  // Same weights, one layer's thresholds replaced. Validates the new rows.
  QuantizedNetwork with_thresholds(int layer, ThresholdMatrix thresholds) const;

 private:
  void validate();
  void check_thresholds(int layer) const;

  std::string name_;
  std::string provenance_;
  QuantSpec quant_;
  InputQuant input_quant_;
  std::vector<Layer> layers_;
  std::vector<Shape> shapes_;  // shapes_[i] enters layer i; back() is the output
};

}  // namespace qnnfault
