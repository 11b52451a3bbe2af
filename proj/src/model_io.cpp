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

#include "qnnfault/model_io.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "qnnfault/error.hpp"

namespace qnnfault {
namespace {

namespace fs = std::filesystem;
using Bytes = std::vector<std::uint8_t>;
using nlohmann::json;

constexpr std::array<char, 4> kDatasetMagic = {'Q', 'F', 'D', '1'};
constexpr std::size_t kDatasetHeaderSize = 20;

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(Bytes& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>((v >> s) & 0xff));
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

Bytes encode_int8(const RowMatrix<std::int32_t>& m) {
  Bytes out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    out.push_back(static_cast<std::uint8_t>(static_cast<std::int8_t>(m.data()[i])));
  }
  return out;
}

Bytes encode_int32(const RowMatrix<std::int32_t>& m) {
  Bytes out;
  out.reserve(static_cast<std::size_t>(m.size()) * 4);
  for (Eigen::Index i = 0; i < m.size(); ++i) put_u32(out, static_cast<std::uint32_t>(m.data()[i]));
  return out;
}

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw LoadError("short write to " + path.string());
}

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

json blob_entry(const std::string& file, const char* dtype, Eigen::Index rows, Eigen::Index cols,
                const Bytes& bytes) {
  return {{"file", file}, {"dtype", dtype}, {"rows", rows}, {"cols", cols},
          {"crc32", hex32(crc32_of(bytes))}};
}

// Reads one blob described by `entry`, checks its checksum and size.
RowMatrix<std::int32_t> load_blob(const fs::path& dir, const json& entry, const std::string& where) {
  const std::string dtype = entry.at("dtype").get<std::string>();
  const auto rows = entry.at("rows").get<Eigen::Index>();
  const auto cols = entry.at("cols").get<Eigen::Index>();
  const Bytes bytes = read_file(dir / entry.at("file").get<std::string>());
  const std::string expected = entry.at("crc32").get<std::string>();
  if (hex32(crc32_of(bytes)) != expected) {
    throw LoadError(where + ": checksum mismatch in " + entry.at("file").get<std::string>() +
                    " (expected " + expected + ", got " + hex32(crc32_of(bytes)) + ")");
  }
  const std::size_t width = dtype == "int8" ? 1 : dtype == "int32" ? 4 : 0;
  if (width == 0) throw LoadError(where + ": unsupported dtype " + dtype);
  if (rows < 0 || cols < 0 || bytes.size() != static_cast<std::size_t>(rows * cols) * width) {
    throw LoadError(where + ": blob size does not match " + std::to_string(rows) + "x" +
                    std::to_string(cols) + " " + dtype);
  }
  RowMatrix<std::int32_t> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = width == 1 ? static_cast<std::int8_t>(bytes[static_cast<std::size_t>(i)])
                             : static_cast<std::int32_t>(get_u32(&bytes[static_cast<std::size_t>(i) * 4]));
  }
  return m;
}

json manifest_header(const QuantizedNetwork& net) {
  const Shape& in = net.input_shape();
  const InputQuant& iq = net.input_quant();
  return {{"format", "qnnfault-model"},
          {"version", kModelFormatVersion},
          {"name", net.name()},
          {"provenance", net.provenance()},
          {"quant", {{"weight_bits", net.quant().weight_bits}, {"act_bits", net.quant().act_bits}}},
          {"input",
           {{"height", in.height}, {"width", in.width}, {"channels", in.channels},
            {"bits", iq.bits}, {"zero_point", iq.zero_point}, {"shift", iq.shift}}}};
}

json layer_header(const Layer& l) {
  json j = {{"kind", std::string(to_string(l.kind))},
            {"in_channels", l.in_channels},
            {"out_channels", l.out_channels}};
  if (l.kind != LayerKind::fc) {
    j["kernel"] = l.kernel;
    j["stride"] = l.stride;
  }
  if (l.kind == LayerKind::conv) j["pad"] = l.pad;
  return j;
}

// Chunked update; empty buffers are skipped (zlib resets on a null pointer).
uLong crc_update(uLong crc, const std::uint8_t* data, std::size_t size) {
  std::size_t off = 0;
  while (off < size) {
    const std::size_t n = std::min<std::size_t>(size - off, 1u << 30);
    crc = ::crc32(crc, data + off, static_cast<uInt>(n));
    off += n;
  }
  return crc;
}

}  // namespace

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(crc_update(::crc32(0L, Z_NULL, 0), bytes.data(), bytes.size()));
}

std::uint32_t crc32_of(const std::string& text) {
  return crc32_of(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void save_model(const QuantizedNetwork& net, const fs::path& dir) {
  fs::create_directories(dir);
  json manifest = manifest_header(net);
  json layers = json::array();
  for (int i = 0; i < net.layer_count(); ++i) {
    const Layer& l = net.layer(i);
    json j = layer_header(l);
    if (l.has_weights()) {
      const std::string stem = "layer" + std::to_string(i);
      const Bytes w = encode_int8(*l.weights);
      write_file(dir / (stem + ".weights.bin"), w);
      j["weights"] = blob_entry(stem + ".weights.bin", "int8", l.weights->rows(), l.weights->cols(), w);
      if (l.thresholded()) {
        const Bytes t = encode_int32(l.thresholds);
        write_file(dir / (stem + ".thresholds.bin"), t);
        j["thresholds"] = blob_entry(stem + ".thresholds.bin", "int32", l.thresholds.rows(),
                                     l.thresholds.cols(), t);
      }
    }
    layers.push_back(std::move(j));
  }
  manifest["layers"] = std::move(layers);
  const std::string text = manifest.dump(2) + "\n";
  write_file(dir / kManifestName, Bytes(text.begin(), text.end()));
}

QuantizedNetwork load_model(const fs::path& path) {
  const fs::path manifest_path = fs::is_directory(path) ? path / kManifestName : path;
  const fs::path dir = manifest_path.parent_path();
  json m;
  try {
    const Bytes bytes = read_file(manifest_path);
    m = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw LoadError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  try {
    if (m.value("format", std::string{}) != "qnnfault-model") {
      throw LoadError(manifest_path.string() + " is not a qnnfault model manifest");
    }
    if (m.at("version").get<int>() != kModelFormatVersion) {
      throw LoadError("unsupported model format version " + m.at("version").dump());
    }
    const QuantSpec quant{m.at("quant").at("weight_bits").get<int>(),
                          m.at("quant").at("act_bits").get<int>()};
    const json& in = m.at("input");
    const Shape shape{in.at("height").get<int>(), in.at("width").get<int>(),
                      in.at("channels").get<int>()};
    const InputQuant iq{in.value("bits", 8), in.value("zero_point", 0), in.value("shift", 0)};

    std::vector<Layer> layers;
    int index = 0;
    for (const json& j : m.at("layers")) {
      const std::string where = "layer " + std::to_string(index++);
      Layer l;
      l.kind = layer_kind_from_string(j.at("kind").get<std::string>());
      l.in_channels = j.at("in_channels").get<int>();
      l.out_channels = j.at("out_channels").get<int>();
      l.kernel = j.value("kernel", 1);
      l.stride = j.value("stride", 1);
      l.pad = j.value("pad", 0);
      if (l.has_weights()) {
        l.weights = std::make_shared<const WeightMatrix>(load_blob(dir, j.at("weights"), where));
        if (j.contains("thresholds")) l.thresholds = load_blob(dir, j.at("thresholds"), where);
        else l.thresholds.resize(l.out_channels, 0);
      }
      layers.push_back(std::move(l));
    }
    return QuantizedNetwork(m.value("name", std::string{}), quant, iq, shape, std::move(layers),
                            m.value("provenance", std::string{}));
  } catch (const json::exception& e) {
    throw LoadError("malformed manifest " + manifest_path.string() + ": " + e.what());
  } catch (const StructuralError& e) {
    throw LoadError(manifest_path.string() + ": " + e.what());
  } catch (const UsageError& e) {
    throw LoadError(manifest_path.string() + ": " + e.what());
  }
}

std::uint32_t network_checksum(const QuantizedNetwork& net) {
  json j = manifest_header(net);
  j.erase("provenance");
  uLong crc = crc32_of(j.dump());
  for (const Layer& l : net.layers()) {
    const std::string h = layer_header(l).dump();
    crc = crc_update(crc, reinterpret_cast<const std::uint8_t*>(h.data()), h.size());
    if (!l.has_weights()) continue;
    const Bytes w = encode_int8(*l.weights);
    crc = crc_update(crc, w.data(), w.size());
    const Bytes t = encode_int32(l.thresholds);
    crc = crc_update(crc, t.data(), t.size());
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint32_t dataset_checksum(const LabeledDataset& data) {
  Bytes b;
  put_u32(b, static_cast<std::uint32_t>(data.size()));
  put_u32(b, static_cast<std::uint32_t>(data.shape.height));
  put_u32(b, static_cast<std::uint32_t>(data.shape.width));
  put_u32(b, static_cast<std::uint32_t>(data.shape.channels));
  b.insert(b.end(), reinterpret_cast<const std::uint8_t*>(data.images.data()),
           reinterpret_cast<const std::uint8_t*>(data.images.data()) + data.images.size());
  for (auto l : data.labels) put_u16(b, l);
  return crc32_of(b);
}

void save_dataset(const LabeledDataset& data, const fs::path& path) {
  if (data.images.rows() != data.size() || data.images.cols() != data.shape.size()) {
    throw UsageError("dataset image matrix does not match its shape and label count");
  }
  Bytes b(kDatasetMagic.begin(), kDatasetMagic.end());
  put_u32(b, static_cast<std::uint32_t>(data.size()));
  put_u32(b, static_cast<std::uint32_t>(data.shape.height));
  put_u32(b, static_cast<std::uint32_t>(data.shape.width));
  put_u32(b, static_cast<std::uint32_t>(data.shape.channels));
  b.insert(b.end(), reinterpret_cast<const std::uint8_t*>(data.images.data()),
           reinterpret_cast<const std::uint8_t*>(data.images.data()) + data.images.size());
  for (auto l : data.labels) put_u16(b, l);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file(path, b);
}

LabeledDataset load_dataset(const fs::path& path) {
  const Bytes b = read_file(path);
  if (b.size() < kDatasetHeaderSize || !std::equal(kDatasetMagic.begin(), kDatasetMagic.end(), b.begin())) {
    throw LoadError(path.string() + ": missing QFD1 header");
  }
  const std::uint32_t count = get_u32(&b[4]);
  LabeledDataset d;
  d.shape = {static_cast<int>(get_u32(&b[8])), static_cast<int>(get_u32(&b[12])),
             static_cast<int>(get_u32(&b[16]))};
  if (d.shape.height < 1 || d.shape.width < 1 || d.shape.channels < 1) {
    throw LoadError(path.string() + ": invalid image shape " + d.shape.str());
  }
  const std::uint64_t pixels = static_cast<std::uint64_t>(count) * static_cast<std::uint64_t>(d.shape.size());
  const std::uint64_t expected = kDatasetHeaderSize + pixels + 2ull * count;
  if (b.size() != expected) {
    throw LoadError(path.string() + ": header declares " + std::to_string(count) + " images of " +
                    d.shape.str() + " (" + std::to_string(expected) + " bytes), file has " +
                    std::to_string(b.size()) + " bytes");
  }
  d.images.resize(count, d.shape.size());
  std::copy_n(reinterpret_cast<const std::int8_t*>(&b[kDatasetHeaderSize]), pixels, d.images.data());
  d.labels.resize(count);
  const std::uint8_t* lp = &b[kDatasetHeaderSize + pixels];
  for (std::uint32_t i = 0; i < count; ++i) d.labels[i] = get_u16(lp + 2 * i);
  return d;
}

}  // namespace qnnfault
