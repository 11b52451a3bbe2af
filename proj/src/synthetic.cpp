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

#include "qnnfault/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "qnnfault/error.hpp"
#include "qnnfault/inference.hpp"

namespace qnnfault {
namespace {

// mt19937_64 output is fully specified by the standard; the reductions below
// avoid std::uniform_int_distribution so models are identical across
// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::int64_t uniform(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

std::int32_t random_level(Rng& rng, const LevelSet& levels) {
  return levels.level_at(static_cast<int>(rng.uniform(0, levels.size() - 1)));
}

ThresholdMatrix random_thresholds(Rng& rng, int channels, int n_thresh, std::int64_t bound,
                                  double spread, int fan_in, std::int32_t wmax, std::int32_t xmax) {
  const double sigma = std::sqrt(static_cast<double>(fan_in)) * wmax * xmax;
  std::int64_t r = static_cast<std::int64_t>(std::ceil(spread * sigma));
  r = std::clamp<std::int64_t>(r, n_thresh, bound);
  if (2 * r + 1 < n_thresh) {
    throw UsageError("accumulator range too small for " + std::to_string(n_thresh) +
                     " distinct thresholds");
  }
  ThresholdMatrix t(channels, n_thresh);
  for (int c = 0; c < channels; ++c) {
    std::set<std::int64_t> picked;
    while (static_cast<int>(picked.size()) < n_thresh) picked.insert(rng.uniform(-r, r));
    int i = 0;
    for (auto v : picked) t(c, i++) = static_cast<std::int32_t>(v);
  }
  return t;
}

QuantizedNetwork build(const SyntheticModelSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  const LevelSet wl = spec.quant.weights();
  const int n_thresh = spec.quant.thresholds_per_channel();
  std::vector<Layer> layers;
  Shape shape = spec.input_shape;
  for (std::size_t i = 0; i < spec.topology.size(); ++i) {
    const LayerDescriptor& d = spec.topology[i];
    const bool last = i + 1 == spec.topology.size();
    const std::int32_t xmax = i == 0 ? spec.input_quant.levels().max_magnitude()
                                     : spec.quant.activations().max_magnitude();
    Layer l;
    if (d.kind == LayerKind::maxpool) {
      l = Layer::make_maxpool(shape.channels, d.kernel, d.stride);
    } else {
      const int fan_in = d.kind == LayerKind::conv ? d.kernel * d.kernel * shape.channels : shape.size();
      WeightMatrix w(d.out_channels, fan_in);
      for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = random_level(rng, wl);
      const std::int64_t bound = static_cast<std::int64_t>(fan_in) * wl.max_magnitude() * xmax;
      ThresholdMatrix t = last ? ThresholdMatrix(d.out_channels, 0)
                               : random_thresholds(rng, d.out_channels, n_thresh, bound,
                                                   spec.threshold_spread, fan_in,
                                                   wl.max_magnitude(), xmax);
      l = d.kind == LayerKind::conv
              ? Layer::make_conv(shape.channels, d.out_channels, d.kernel, d.stride, d.pad, std::move(w),
                                 std::move(t))
              : Layer::make_fc(shape.size(), d.out_channels, std::move(w), std::move(t));
    }
    shape = output_shape(l, shape);
    layers.push_back(std::move(l));
  }
  return QuantizedNetwork(spec.name, spec.quant, spec.input_quant, spec.input_shape, std::move(layers),
                          "synthetic seed=" + std::to_string(seed));
}

}  // namespace

QuantizedNetwork generate_synthetic(const SyntheticModelSpec& spec) {
  if (spec.topology.empty()) throw UsageError("synthetic topology is empty");
  const LabeledDataset probe = random_images(spec.input_shape, 64, spec.seed ^ 0x9e3779b97f4a7c15ull);
  for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
    QuantizedNetwork net = build(spec, spec.seed + static_cast<std::uint64_t>(attempt));
    std::set<int> classes;
    for (int i = 0; i < probe.size() && classes.size() < 2; ++i) {
      classes.insert(infer(net, probe.image(i, net.input_quant())));
    }
    if (classes.size() >= 2) return net;
  }
  throw UsageError("could not generate a non-degenerate network for seed " +
                   std::to_string(spec.seed));
}

LabeledDataset random_images(const Shape& shape, int count, std::uint64_t seed) {
  Rng rng(seed);
  LabeledDataset d;
  d.shape = shape;
  d.images.resize(count, shape.size());
  for (Eigen::Index k = 0; k < d.images.size(); ++k) {
    d.images.data()[k] = static_cast<std::int8_t>(rng.uniform(-128, 127));
  }
  d.labels.assign(static_cast<std::size_t>(count), 0);
  return d;
}

LabeledDataset generate_dataset(const QuantizedNetwork& net, int count, std::uint64_t seed,
                                double label_agreement) {
  LabeledDataset d = random_images(net.input_shape(), count, seed);
  Rng rng(seed * 0x2545f4914f6cdd1dull + 7);
  for (int i = 0; i < count; ++i) {
    const int predicted = infer(net, d.image(i, net.input_quant()));
    const bool agree = rng.unit() < label_agreement;
    const auto random_class = rng.uniform(0, net.class_count() - 1);
    d.labels[static_cast<std::size_t>(i)] =
        static_cast<std::uint16_t>(agree ? predicted : random_class);
  }
  return d;
}

SyntheticModelSpec desk_spec(QuantSpec quant, std::uint64_t seed) {
  SyntheticModelSpec s;
  s.seed = seed;
  s.name = "desk-" + quant.name();
  s.quant = quant;
  s.input_shape = {8, 8, 3};
  s.topology = {LayerDescriptor::conv(16, 3, 1, 1), LayerDescriptor::pool(),
                LayerDescriptor::conv(32, 3, 1, 1), LayerDescriptor::pool(),
                LayerDescriptor::fc(32),           LayerDescriptor::fc(10)};
  return s;
}

SyntheticModelSpec cnv_spec(QuantSpec quant, std::uint64_t seed) {
  SyntheticModelSpec s;
  s.seed = seed;
  s.name = "cnv-" + quant.name();
  s.quant = quant;
  s.input_shape = {32, 32, 3};
  s.topology = {LayerDescriptor::conv(64),  LayerDescriptor::conv(64),  LayerDescriptor::pool(),
                LayerDescriptor::conv(128), LayerDescriptor::conv(128), LayerDescriptor::pool(),
                LayerDescriptor::conv(256), LayerDescriptor::conv(256), LayerDescriptor::fc(512),
                LayerDescriptor::fc(512),   LayerDescriptor::fc(10)};
  return s;
}

SyntheticModelSpec lfc_spec(QuantSpec quant, std::uint64_t seed) {
  SyntheticModelSpec s;
  s.seed = seed;
  s.name = "lfc-" + quant.name();
  s.quant = quant;
  s.input_shape = {28, 28, 1};
  s.topology = {LayerDescriptor::fc(1024), LayerDescriptor::fc(1024), LayerDescriptor::fc(1024),
                LayerDescriptor::fc(10)};
  return s;
}

SyntheticModelSpec toy_spec(QuantSpec quant, std::uint64_t seed) {
  SyntheticModelSpec s;
  s.seed = seed;
  s.name = "toy-" + quant.name();
  s.quant = quant;
  s.input_shape = {4, 4, 2};
  s.topology = {LayerDescriptor::conv(4), LayerDescriptor::fc(3), LayerDescriptor::fc(2)};
  return s;
}

}  // namespace qnnfault
