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
#include <functional>
#include <vector>

#include "qnnfault/dataset.hpp"
#include "qnnfault/error.hpp"
#include "qnnfault/network.hpp"
#include "qnnfault/parallel.hpp"

namespace qnnfault {

// Multi-threshold activation: level_at(#{i : val > thresholds[i]}).
// Comparison is strict; val == thresholds[i] does not fire.
std::int32_t threshold_activation(const LevelSet& activations,
                                  const Eigen::Ref<const RowVector<std::int32_t>>& thresholds,
                                  std::int32_t val);

// One MVTU output: dot product of a channel's weights with an input window
// (fan-in ordered as in the weight matrix), then thresholding.
std::int32_t mvtu_channel(const Layer& layer, const LevelSet& activations,
                          const Eigen::Ref<const RowVector<std::int32_t>>& window, int channel);

// Sliding windows of a conv layer (or the flattened input of an fc layer),
// one row per output pixel.
LevelMatrix im2col(const Layer& layer, const FeatureMap& input);

// Integer accumulators, output pixels x out channels.
AccumulatorMatrix accumulate(const Layer& layer, const FeatureMap& input);

// Applies the layer's per-channel thresholds to accumulators.
FeatureMap activate(const Layer& layer, const LevelSet& activations,
                    const AccumulatorMatrix& accumulators, const Shape& out_shape);

FeatureMap maxpool(const Layer& layer, const FeatureMap& input);

// Called with every non-final layer output before it feeds the next layer.
using ForwardHook = std::function<void(int layer, FeatureMap& output)>;

struct LayerTrace {
  AccumulatorMatrix accumulators;  // empty for maxpool
  FeatureMap output;               // raw scores as a 1x1xK map for the head
};

// Full forward pass keeping every layer's accumulators and outputs.
std::vector<LayerTrace> trace(const QuantizedNetwork& net, const FeatureMap& image);

// Classifier scores for `input` entering layer `first_layer`.
RowVector<std::int32_t> scores_from(const QuantizedNetwork& net, int first_layer,
                                    FeatureMap input, const ForwardHook& hook = {});

inline RowVector<std::int32_t> scores(const QuantizedNetwork& net, const FeatureMap& image,
                                      const ForwardHook& hook = {}) {
  return scores_from(net, 0, image, hook);
}

// Index of the highest score; ties go to the lowest class index.
int argmax_class(const Eigen::Ref<const RowVector<std::int32_t>>& scores);

int infer(const QuantizedNetwork& net, const FeatureMap& image, const ForwardHook& hook = {});

struct Evaluation {
  std::int64_t correct = 0;
  std::int64_t total = 0;

  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
  friend bool operator==(const Evaluation&, const Evaluation&) = default;
};

// Counts correct classifications of `classify(image_index, worker)` over the
// dataset. Integer counts make the result independent of `jobs`.
template <typename Classify>
Evaluation evaluate_with(const LabeledDataset& data, int jobs, Classify&& classify) {
  if (data.size() == 0) throw UsageError("cannot evaluate on an empty dataset");
  std::vector<std::int64_t> per_worker(static_cast<std::size_t>(std::max(1, jobs)), 0);
  parallel_for(data.size(), jobs, [&](int i, int w) {
    if (classify(i, w) == data.labels[static_cast<std::size_t>(i)]) ++per_worker[static_cast<std::size_t>(w)];
  });
  Evaluation e;
  e.total = data.size();
  for (auto c : per_worker) e.correct += c;
  return e;
}

Evaluation evaluate(const QuantizedNetwork& net, const LabeledDataset& data, int jobs = 1);

}  // namespace qnnfault
