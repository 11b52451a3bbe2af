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

#include "qnnfault/inference.hpp"

#include <algorithm>

#include "qnnfault/error.hpp"

namespace qnnfault {

std::int32_t threshold_activation(const LevelSet& activations,
                                  const Eigen::Ref<const RowVector<std::int32_t>>& thresholds,
                                  std::int32_t val) {
  int fired = 0;
  for (Eigen::Index i = 0; i < thresholds.size(); ++i) fired += val > thresholds[i] ? 1 : 0;
  return activations.level_at(fired);
}

std::int32_t mvtu_channel(const Layer& layer, const LevelSet& activations,
                          const Eigen::Ref<const RowVector<std::int32_t>>& window, int channel) {
  if (!layer.has_weights() || !layer.thresholded()) {
    throw StructuralError("mvtu_channel needs a thresholded conv/fc layer");
  }
  if (window.size() != layer.fan_in()) {
    throw StructuralError("input window has " + std::to_string(window.size()) +
                          " entries, layer fan-in is " + std::to_string(layer.fan_in()));
  }
  if (channel < 0 || channel >= layer.out_channels) {
    throw StructuralError("channel " + std::to_string(channel) + " out of range");
  }
  const std::int32_t val = layer.weights->row(channel).dot(window);
  return threshold_activation(activations, layer.thresholds.row(channel), val);
}

LevelMatrix im2col(const Layer& layer, const FeatureMap& input) {
  if (layer.kind == LayerKind::fc) {
    if (input.shape.size() != layer.in_channels) {
      throw StructuralError("fc layer expects " + std::to_string(layer.in_channels) +
                            " inputs, got " + input.shape.str());
    }
    return input.flat();
  }
  if (layer.kind != LayerKind::conv) throw StructuralError("im2col on a maxpool layer");
  if (input.shape.channels != layer.in_channels) {
    throw StructuralError("conv layer expects " + std::to_string(layer.in_channels) +
                          " channels, got " + input.shape.str());
  }
  const Shape out = output_shape(layer, input.shape);
  const int c = input.shape.channels;
  LevelMatrix patches = LevelMatrix::Zero(out.pixels(), layer.fan_in());
  for (int oy = 0; oy < out.height; ++oy) {
    for (int ox = 0; ox < out.width; ++ox) {
      const int row = oy * out.width + ox;
      for (int ky = 0; ky < layer.kernel; ++ky) {
        const int iy = oy * layer.stride + ky - layer.pad;
        if (iy < 0 || iy >= input.shape.height) continue;
        for (int kx = 0; kx < layer.kernel; ++kx) {
          const int ix = ox * layer.stride + kx - layer.pad;
          if (ix < 0 || ix >= input.shape.width) continue;
          patches.row(row).segment((ky * layer.kernel + kx) * c, c) =
              input.data.row(iy * input.shape.width + ix);
        }
      }
    }
  }
  return patches;
}

AccumulatorMatrix accumulate(const Layer& layer, const FeatureMap& input) {
  const LevelMatrix patches = im2col(layer, input);
  AccumulatorMatrix acc(patches.rows(), layer.out_channels);
  acc.noalias() = patches * layer.weights->transpose();
  return acc;
}

FeatureMap activate(const Layer& layer, const LevelSet& activations,
                    const AccumulatorMatrix& accumulators, const Shape& out_shape) {
  FeatureMap out(out_shape);
  const Eigen::Index n_thresh = layer.thresholds.cols();
  for (Eigen::Index ch = 0; ch < accumulators.cols(); ++ch) {
    const auto th = layer.thresholds.row(ch);
    for (Eigen::Index p = 0; p < accumulators.rows(); ++p) {
      const std::int32_t val = accumulators(p, ch);
      int fired = 0;
      for (Eigen::Index i = 0; i < n_thresh; ++i) fired += val > th[i] ? 1 : 0;
      out.data(p, ch) = activations.level_at(fired);
    }
  }
  return out;
}

FeatureMap maxpool(const Layer& layer, const FeatureMap& input) {
  const Shape out_shape = output_shape(layer, input.shape);
  FeatureMap out(out_shape);
  for (int oy = 0; oy < out_shape.height; ++oy) {
    for (int ox = 0; ox < out_shape.width; ++ox) {
      auto dst = out.data.row(oy * out_shape.width + ox);
      dst = input.data.row((oy * layer.stride) * input.shape.width + ox * layer.stride);
      for (int ky = 0; ky < layer.kernel; ++ky) {
        for (int kx = 0; kx < layer.kernel; ++kx) {
          const int p = (oy * layer.stride + ky) * input.shape.width + ox * layer.stride + kx;
          dst = dst.cwiseMax(input.data.row(p));
        }
      }
    }
  }
  return out;
}

std::vector<LayerTrace> trace(const QuantizedNetwork& net, const FeatureMap& image) {
  if (image.shape != net.input_shape()) {
    throw StructuralError("image shape " + image.shape.str() + " does not match network input " +
                          net.input_shape().str());
  }
  const LevelSet acts = net.quant().activations();
  std::vector<LayerTrace> out;
  out.reserve(static_cast<std::size_t>(net.layer_count()));
  const FeatureMap* current = &image;
  for (int i = 0; i < net.layer_count(); ++i) {
    const Layer& l = net.layer(i);
    LayerTrace t;
    if (l.kind == LayerKind::maxpool) {
      t.output = maxpool(l, *current);
    } else {
      t.accumulators = accumulate(l, *current);
      if (l.thresholded()) {
        t.output = activate(l, acts, t.accumulators, net.output_shape_of(i));
      } else {
        t.output = FeatureMap(net.output_shape_of(i), t.accumulators);
      }
    }
    out.push_back(std::move(t));
    current = &out.back().output;
  }
  return out;
}

RowVector<std::int32_t> scores_from(const QuantizedNetwork& net, int first_layer,
                                    FeatureMap input, const ForwardHook& hook) {
  if (first_layer < 0 || first_layer >= net.layer_count()) {
    throw StructuralError("start layer " + std::to_string(first_layer) + " out of range");
  }
  if (input.shape != net.input_shape_of(first_layer)) {
    throw StructuralError("input shape " + input.shape.str() + " does not match layer " +
                          std::to_string(first_layer) + " input " +
                          net.input_shape_of(first_layer).str());
  }
  const LevelSet acts = net.quant().activations();
  const int last = net.layer_count() - 1;
  for (int i = first_layer; i < last; ++i) {
    const Layer& l = net.layer(i);
    if (l.kind == LayerKind::maxpool) {
      input = maxpool(l, input);
    } else {
      input = activate(l, acts, accumulate(l, input), net.output_shape_of(i));
    }
    if (hook) hook(i, input);
  }
  return accumulate(net.layer(last), input);
}

int argmax_class(const Eigen::Ref<const RowVector<std::int32_t>>& scores) {
  if (scores.size() == 0) throw StructuralError("empty score vector");
  int best = 0;
  for (Eigen::Index k = 1; k < scores.size(); ++k) {
    if (scores[k] > scores[best]) best = static_cast<int>(k);
  }
  return best;
}

int infer(const QuantizedNetwork& net, const FeatureMap& image, const ForwardHook& hook) {
  return argmax_class(scores(net, image, hook));
}

Evaluation evaluate(const QuantizedNetwork& net, const LabeledDataset& data, int jobs) {
  if (data.shape != net.input_shape()) {
    throw StructuralError("dataset shape " + data.shape.str() + " does not match network input " +
                          net.input_shape().str());
  }
  return evaluate_with(data, jobs, [&](int i, int) {
    return infer(net, data.image(i, net.input_quant()));
  });
}

}  // namespace qnnfault
