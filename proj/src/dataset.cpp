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

#include "qnnfault/dataset.hpp"

#include "qnnfault/error.hpp"

namespace qnnfault {

LabeledDataset LabeledDataset::subset(int count) const {
  if (count <= 0 || count >= size()) return *this;
  LabeledDataset out;
  out.shape = shape;
  out.images = images.topRows(count);
  out.labels.assign(labels.begin(), labels.begin() + count);
  return out;
}

FeatureMap LabeledDataset::image(int i, const InputQuant& quant) const {
  if (i < 0 || i >= size()) throw UsageError("image index " + std::to_string(i) + " out of range");
  FeatureMap out(shape);
  const auto raw = images.row(i);
  std::int32_t* dst = out.data.data();
  for (Eigen::Index k = 0; k < raw.size(); ++k) dst[k] = quant.apply(raw[k]);
  return out;
}

}  // namespace qnnfault
