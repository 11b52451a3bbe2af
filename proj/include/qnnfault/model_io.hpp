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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qnnfault/dataset.hpp"
#include "qnnfault/network.hpp"

namespace qnnfault {

/// Model container: a JSON manifest plus one little-endian blob per weight
/// matrix (int8 levels) and threshold matrix (int32), stored next to the
/// manifest and protected by CRC-32. See docs/formats.md for field names.
inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kManifestName = "model.json";

// Writes `<dir>/model.json` and its blobs; creates `dir` if needed.
void save_model(const QuantizedNetwork& net, const std::filesystem::path& dir);

// Accepts the manifest path or the directory containing model.json. Every
// network invariant is enforced; errors name the offending layer/channel.
QuantizedNetwork load_model(const std::filesystem::path& path);

/// Dataset file: 20-byte header {"QFD1", u32 count, u32 height, u32 width,
/// u32 channels}, then count*h*w*c int8 pixels in (image, y, x, c) order,
/// then count u16 labels. All little-endian.
void save_dataset(const LabeledDataset& data, const std::filesystem::path& path);
LabeledDataset load_dataset(const std::filesystem::path& path);

// CRC-32 (zlib polynomial) of a byte range.
std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);
std::uint32_t crc32_of(const std::string& text);

// Content hash of a network: CRC-32 over the canonical manifest and blobs.
std::uint32_t network_checksum(const QuantizedNetwork& net);
std::uint32_t dataset_checksum(const LabeledDataset& data);

}  // namespace qnnfault
