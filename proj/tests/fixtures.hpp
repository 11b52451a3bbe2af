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
#include <random>
#include <vector>

#include "qnnfault/dataset.hpp"
#include "qnnfault/network.hpp"
#include "qnnfault/synthetic.hpp"

namespace qnnfault::testing {

inline WeightMatrix weights_from(int rows, int cols, std::initializer_list<std::int32_t> v) {
  WeightMatrix m(rows, cols);
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

// All level combinations of `n` inputs drawn from `levels`, as raw int8
// pixels that an identity input quantizer (bits 8) maps back onto the levels.
inline std::vector<std::vector<std::int32_t>> enumerate_inputs(int n, const std::vector<std::int32_t>& levels) {
  std::vector<std::vector<std::int32_t>> out{{}};
  for (int i = 0; i < n; ++i) {
    std::vector<std::vector<std::int32_t>> next;
    for (const auto& prefix : out)
      for (auto l : levels) {
        auto v = prefix;
        v.push_back(l);
        next.push_back(std::move(v));
      }
    out = std::move(next);
  }
  return out;
}

inline FeatureMap feature_map(const Shape& s, const std::vector<std::int32_t>& v) {
  FeatureMap f(s);
  std::copy(v.begin(), v.end(), f.data.data());
  return f;
}

inline std::vector<std::int64_t> as_int64(const std::vector<std::int32_t>& v) {
  return {v.begin(), v.end()};
}

// Dataset whose images are given level vectors (identity 8-bit input quantizer).
inline LabeledDataset dataset_from(const Shape& s, const std::vector<std::vector<std::int32_t>>& images,
                                   const std::vector<std::uint16_t>& labels) {
  LabeledDataset d;
  d.shape = s;
  d.images.resize(static_cast<Eigen::Index>(images.size()), s.size());
  for (std::size_t i = 0; i < images.size(); ++i)
    for (int k = 0; k < s.size(); ++k)
      d.images(static_cast<Eigen::Index>(i), k) = static_cast<std::int8_t>(images[i][static_cast<std::size_t>(k)]);
  d.labels = labels;
  return d;
}

// Desk-scale nets at the precisions the injection suite covers.
inline std::vector<QuantSpec> all_precisions() {
  return {{1, 1}, {1, 2}, {2, 2}, {4, 4}};
}

}  // namespace qnnfault::testing
