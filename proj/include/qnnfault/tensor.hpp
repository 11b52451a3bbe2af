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

#include <Eigen/Core>

namespace qnnfault {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic, Eigen::RowMajor>;

// Activation levels, weight levels and accumulators all live in int32; the
// network loader rejects any layer whose accumulator bound would not fit.
using LevelMatrix = RowMatrix<std::int32_t>;
using WeightMatrix = RowMatrix<std::int32_t>;
using ThresholdMatrix = RowMatrix<std::int32_t>;
using AccumulatorMatrix = RowMatrix<std::int32_t>;

struct Shape {
  int height = 1;
  int width = 1;
  int channels = 1;

  int pixels() const { return height * width; }
  int size() const { return height * width * channels; }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Feature map of activation levels. Row p = y * width + x holds the
/// channel vector of pixel (y, x); a flattened vector is 1x1xN.
struct FeatureMap {
  Shape shape;
  LevelMatrix data;

  FeatureMap() = default;
  explicit FeatureMap(Shape s) : shape(s), data(LevelMatrix::Zero(s.pixels(), s.channels)) {}
  FeatureMap(Shape s, LevelMatrix d) : shape(s), data(std::move(d)) {}

  std::int32_t at(int y, int x, int c) const { return data(y * shape.width + x, c); }
  std::int32_t& at(int y, int x, int c) { return data(y * shape.width + x, c); }

  // Flat view in (y, x, c) order; the order fully-connected layers consume.
  Eigen::Map<const RowVector<std::int32_t>> flat() const {
    return {data.data(), data.size()};
  }

  friend bool operator==(const FeatureMap& a, const FeatureMap& b) {
    return a.shape == b.shape && a.data == b.data;
  }
};

}  // namespace qnnfault
