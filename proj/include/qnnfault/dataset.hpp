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
#include <vector>

#include "qnnfault/quant.hpp"
#include "qnnfault/tensor.hpp"

namespace qnnfault {

/// Raw signed 8-bit images with class labels. Row i holds image i in
/// (y, x, c) order.
struct LabeledDataset {
  Shape shape;
  RowMatrix<std::int8_t> images;
  std::vector<std::uint16_t> labels;

  int size() const { return static_cast<int>(labels.size()); }

  // First `count` records; the whole set when count <= 0 or >= size().
  LabeledDataset subset(int count) const;

  // Quantize image i into the levels of the first layer.
  FeatureMap image(int i, const InputQuant& quant) const;
};

}  // namespace qnnfault
