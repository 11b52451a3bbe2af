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

#include "qnnfault/network.hpp"

#include <limits>

#include "qnnfault/error.hpp"

namespace qnnfault {

std::string Shape::str() const {
  return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
}

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::fc: return "fc";
    case LayerKind::maxpool: return "maxpool";
  }
  return "?";
}

LayerKind layer_kind_from_string(std::string_view s) {
  if (s == "conv") return LayerKind::conv;
  if (s == "fc") return LayerKind::fc;
  if (s == "maxpool") return LayerKind::maxpool;
  throw StructuralError("unknown layer kind '" + std::string(s) + "'");
}

Layer Layer::make_conv(int in_channels, int out_channels, int kernel, int stride, int pad,
                       WeightMatrix weights, ThresholdMatrix thresholds) {
  Layer l;
  l.kind = LayerKind::conv;
  l.in_channels = in_channels;
  l.out_channels = out_channels;
  l.kernel = kernel;
  l.stride = stride;
  l.pad = pad;
  l.weights = std::make_shared<const WeightMatrix>(std::move(weights));
  l.thresholds = std::move(thresholds);
  return l;
}

Layer Layer::make_fc(int in_n, int out_n, WeightMatrix weights, ThresholdMatrix thresholds) {
  Layer l;
  l.kind = LayerKind::fc;
  l.in_channels = in_n;
  l.out_channels = out_n;
  l.weights = std::make_shared<const WeightMatrix>(std::move(weights));
  l.thresholds = std::move(thresholds);
  return l;
}

Layer Layer::make_maxpool(int channels, int kernel, int stride) {
  Layer l;
  l.kind = LayerKind::maxpool;
  l.in_channels = channels;
  l.out_channels = channels;
  l.kernel = kernel;
  l.stride = stride;
  return l;
}

Shape output_shape(const Layer& layer, const Shape& in) {
  switch (layer.kind) {
    case LayerKind::conv: {
      const int h = (in.height + 2 * layer.pad - layer.kernel) / layer.stride + 1;
      const int w = (in.width + 2 * layer.pad - layer.kernel) / layer.stride + 1;
      return {h, w, layer.out_channels};
    }
    case LayerKind::maxpool:
      return {(in.height - layer.kernel) / layer.stride + 1,
              (in.width - layer.kernel) / layer.stride + 1, in.channels};
    case LayerKind::fc:
      return {1, 1, layer.out_channels};
  }
  return in;
}

AccumulatorBound accumulator_bound(const Layer& layer, std::int32_t max_weight,
                                   std::int32_t max_input, int layer_id) {
  if (!layer.has_weights()) {
    throw UsageError("accumulator bound requested for a maxpool layer");
  }
  return {layer_id, static_cast<std::int64_t>(max_weight) * max_input * layer.fan_in()};
}

QuantizedNetwork::QuantizedNetwork(std::string name, QuantSpec quant, InputQuant input_quant,
                                   Shape input_shape, std::vector<Layer> layers,
                                   std::string provenance)
    : name_(std::move(name)),
      provenance_(std::move(provenance)),
      quant_(quant),
      input_quant_(input_quant),
      layers_(std::move(layers)) {
  // LevelSet constructors reject illegal bit widths.
  (void)quant_.weights();
  (void)quant_.activations();
  (void)input_quant_.levels();
  shapes_.push_back(input_shape);
  validate();
}

std::int32_t QuantizedNetwork::input_magnitude(int layer) const {
  return layer == 0 ? input_quant_.levels().max_magnitude()
                    : quant_.activations().max_magnitude();
}

AccumulatorBound QuantizedNetwork::accumulator_bound(int layer) const {
  return qnnfault::accumulator_bound(this->layer(layer), quant_.weights().max_magnitude(),
                                     input_magnitude(layer), layer);
}

std::vector<int> QuantizedNetwork::thresholded_layers() const {
  std::vector<int> out;
  for (int i = 0; i < layer_count(); ++i) {
    if (layers_[static_cast<std::size_t>(i)].thresholded()) out.push_back(i);
  }
  return out;
}

QuantizedNetwork QuantizedNetwork::with_thresholds(int layer, ThresholdMatrix thresholds) const {
  if (layer < 0 || layer >= layer_count() || !this->layer(layer).thresholded()) {
    throw UsageError("layer " + std::to_string(layer) + " has no thresholds to replace");
  }
  QuantizedNetwork copy = *this;
  copy.layers_[static_cast<std::size_t>(layer)].thresholds = std::move(thresholds);
  copy.check_thresholds(layer);
  return copy;
}

void QuantizedNetwork::check_thresholds(int i) const {
  const Layer& l = layers_[static_cast<std::size_t>(i)];
  const int n_thresh = quant_.thresholds_per_channel();
  const std::string where = "layer " + std::to_string(i) + " (" + std::string(to_string(l.kind)) + ")";
  if (l.thresholds.rows() != l.out_channels || l.thresholds.cols() != n_thresh) {
    throw StructuralError(where + ": threshold matrix must be " + std::to_string(l.out_channels) +
                          "x" + std::to_string(n_thresh));
  }
  const std::int64_t th_max = accumulator_bound(i).th_max();
  // Ties are only meaningful as saturated (stuck) rows at +-th_max.
  for (Eigen::Index r = 0; r < l.thresholds.rows(); ++r) {
    for (Eigen::Index c = 1; c < l.thresholds.cols(); ++c) {
      const std::int64_t a = l.thresholds(r, c - 1);
      const std::int64_t b = l.thresholds(r, c);
      const bool saturated_tie = a == b && (a == th_max || a == -th_max);
      if (!(a < b || saturated_tie)) {
        throw StructuralError(where + ": thresholds of channel " + std::to_string(r) +
                              " are not strictly ascending");
      }
    }
  }
}

void QuantizedNetwork::validate() {
  if (layers_.empty()) throw StructuralError("network '" + name_ + "' has no layers");
  const Shape in = shapes_.front();
  if (in.height < 1 || in.width < 1 || in.channels < 1) {
    throw StructuralError("invalid input shape " + in.str());
  }
  auto& shapes = shapes_;
  shapes.resize(1);

  const LevelSet wlevels = quant_.weights();
  for (int i = 0; i < layer_count(); ++i) {
    const Layer& l = layers_[static_cast<std::size_t>(i)];
    const Shape& s = shapes.back();
    const std::string where = "layer " + std::to_string(i) + " (" + std::string(to_string(l.kind)) + ")";
    const bool last = i + 1 == layer_count();

    switch (l.kind) {
      case LayerKind::conv:
        if (l.in_channels != s.channels) {
          throw StructuralError(where + ": expects " + std::to_string(l.in_channels) +
                                " input channels, receives " + s.str());
        }
        if (l.kernel < 1 || l.stride < 1 || l.pad < 0 ||
            s.height + 2 * l.pad < l.kernel || s.width + 2 * l.pad < l.kernel) {
          throw StructuralError(where + ": kernel/stride/pad incompatible with input " + s.str());
        }
        break;
      case LayerKind::fc:
        if (l.in_channels != s.size()) {
          throw StructuralError(where + ": expects " + std::to_string(l.in_channels) +
                                " inputs, receives " + s.str());
        }
        break;
      case LayerKind::maxpool:
        if (l.in_channels != s.channels || l.out_channels != s.channels) {
          throw StructuralError(where + ": channel count mismatch with input " + s.str());
        }
        if (l.kernel < 1 || l.stride < 1 || s.height < l.kernel || s.width < l.kernel) {
          throw StructuralError(where + ": window incompatible with input " + s.str());
        }
        if (last) throw StructuralError(where + ": network cannot end with maxpool");
        shapes.push_back(output_shape(l, s));
        continue;
    }

    if (l.out_channels < 1) throw StructuralError(where + ": no output channels");
    if (!l.weights || l.weights->rows() != l.out_channels || l.weights->cols() != l.fan_in()) {
      throw StructuralError(where + ": weight matrix must be " + std::to_string(l.out_channels) +
                            "x" + std::to_string(l.fan_in()));
    }
    for (Eigen::Index r = 0; r < l.weights->rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights->cols(); ++c) {
        if (!wlevels.contains((*l.weights)(r, c))) {
          throw StructuralError(where + ": channel " + std::to_string(r) + " weight " +
                                std::to_string((*l.weights)(r, c)) + " is not a " +
                                std::to_string(quant_.weight_bits) + "-bit level");
        }
      }
    }

    const AccumulatorBound bound = qnnfault::accumulator_bound(
        l, wlevels.max_magnitude(), input_magnitude(i), i);
    if (bound.th_max() >= std::numeric_limits<std::int32_t>::max()) {
      throw StructuralError(where + ": accumulator bound exceeds 32-bit range");
    }

    if (last) {
      if (l.kind != LayerKind::fc || l.thresholds.cols() != 0) {
        throw StructuralError(where + ": final layer must be an unthresholded fc classifier");
      }
    } else {
      check_thresholds(i);
    }
    shapes.push_back(output_shape(l, s));
    const Shape& o = shapes.back();
    if (o.height < 1 || o.width < 1) throw StructuralError(where + ": empty output");
  }
}

}  // namespace qnnfault
