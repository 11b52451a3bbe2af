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

#include "qnnfault/campaign.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qnnfault/error.hpp"
#include "qnnfault/inference.hpp"
#include "qnnfault/model_io.hpp"
#include "qnnfault/parallel.hpp"

namespace qnnfault {

namespace {

constexpr const char* kStoreFormat = "qnnfault-campaign";
constexpr int kStoreVersion = 1;

using nlohmann::json;

std::vector<int> resolve_layers(const QuantizedNetwork& net, std::vector<int> layers) {
  if (layers.empty()) return net.thresholded_layers();
  std::sort(layers.begin(), layers.end());
  layers.erase(std::unique(layers.begin(), layers.end()), layers.end());
  for (int l : layers) {
    if (l < 0 || l >= net.layer_count() || !net.layer(l).thresholded()) {
      throw UsageError("layer " + std::to_string(l) + " is not a thresholded conv/fc layer");
    }
  }
  return layers;
}

std::vector<std::int32_t> resolve_levels(const QuantizedNetwork& net, std::vector<std::int32_t> levels) {
  if (levels.empty()) throw UsageError("campaign needs at least one stuck level");
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  const LevelSet acts = net.quant().activations();
  for (auto v : levels) {
    if (!acts.contains(v)) {
      throw UsageError("stuck level " + std::to_string(v) + " is not legal for " + net.quant().name());
    }
  }
  return levels;
}

std::uint32_t record_crc(const FaultSpec& f, std::int64_t correct) {
  return crc32_of(f.key() + "=" + std::to_string(correct));
}

json store_header(const CampaignPlan& plan, std::uint32_t dataset_crc, int images) {
  return json{{"format", kStoreFormat},
              {"version", kStoreVersion},
              {"plan_hash", plan.hash()},
              {"mode", std::string(to_string(plan.mode))},
              {"network", plan.network_name},
              {"network_crc", plan.network_checksum},
              {"dataset_crc", dataset_crc},
              {"images", images},
              {"planned", plan.size()},
              {"layers", plan.layers},
              {"levels", plan.levels},
              {"group_size", plan.group_size}};
}

struct StoreContents {
  json header;
  std::optional<std::int64_t> baseline;
  std::vector<ExperimentResult> records;
  std::vector<std::string> valid_lines;
};

// Reads every complete, well-formed line; stops at the first torn or
// corrupt one (an interrupted append).
StoreContents read_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open campaign store " + path.string());
  StoreContents s;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (in.eof()) break;  // no trailing newline: torn append
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) break;
    if (first) {
      if (!j.is_object() || j.value("format", "") != kStoreFormat) {
        throw LoadError(path.string() + " is not a campaign store");
      }
      if (j.value("version", 0) != kStoreVersion) {
        throw LoadError("unsupported campaign store version in " + path.string());
      }
      s.header = std::move(j);
      first = false;
    } else if (j.contains("baseline")) {
      s.baseline = j.at("baseline").get<std::int64_t>();
    } else {
      try {
        ExperimentResult r{j.get<FaultSpec>(), j.at("correct").get<std::int64_t>()};
        if (j.at("crc").get<std::uint32_t>() != record_crc(r.fault, r.correct)) break;
        s.records.push_back(std::move(r));
      } catch (const json::exception&) {
        break;
      }
    }
    s.valid_lines.push_back(line);
  }
  if (first) throw LoadError("campaign store " + path.string() + " has no header");
  return s;
}

std::string record_line(const ExperimentResult& r) {
  json j = r.fault;
  j["correct"] = r.correct;
  j["crc"] = record_crc(r.fault, r.correct);
  return j.dump();
}

class StoreWriter {
 public:
  StoreWriter() = default;
  explicit StoreWriter(const std::filesystem::path& path, bool truncate) : path_(path) {
    out_.open(path, truncate ? std::ios::binary | std::ios::trunc : std::ios::binary | std::ios::app);
    if (!out_) throw LoadError("cannot write campaign store " + path.string());
  }
  void line(const std::string& s) {
    if (!out_.is_open()) return;
    out_ << s << '\n';
  }
  void flush() {
    if (!out_.is_open()) return;
    out_.flush();
    if (!out_) throw LoadError("write to campaign store " + path_.string() + " failed");
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

std::string format_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string join_channels(const std::vector<int>& c, char sep) {
  std::string s;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i) s += sep;
    s += std::to_string(c[i]);
  }
  return s;
}

}  // namespace

std::string_view to_string(CampaignMode mode) {
  switch (mode) {
    case CampaignMode::whole_channel: return "whole_channel";
    case CampaignMode::pe_combinations: return "pe_combinations";
    case CampaignMode::custom: return "custom";
  }
  return "?";
}

CampaignMode campaign_mode_from_string(std::string_view s) {
  if (s == "whole_channel") return CampaignMode::whole_channel;
  if (s == "pe_combinations") return CampaignMode::pe_combinations;
  if (s == "custom") return CampaignMode::custom;
  throw UsageError("unknown campaign mode '" + std::string(s) + "'");
}

std::uint32_t CampaignPlan::hash() const {
  std::string canon = std::string(to_string(mode)) + "|" + std::to_string(network_checksum) + "|" +
                      std::to_string(group_size) + "|";
  for (const auto& f : experiments) canon += f.key() + ";";
  return crc32_of(canon);
}

std::vector<std::int32_t> all_levels(const QuantizedNetwork& net) {
  return net.quant().activations().levels();
}

CampaignPlan plan_whole_channel(const QuantizedNetwork& net, std::vector<std::int32_t> levels,
                                std::vector<int> layers) {
  CampaignPlan p;
  p.mode = CampaignMode::whole_channel;
  p.network_name = net.name();
  p.network_checksum = network_checksum(net);
  p.layers = resolve_layers(net, std::move(layers));
  p.levels = resolve_levels(net, std::move(levels));
  p.group_size = 1;
  p.experiments.reserve(whole_channel_count(net, p.levels.size(), p.layers));
  for (int l : p.layers) {
    for (auto v : p.levels) {
      for (int c = 0; c < net.layer(l).out_channels; ++c) p.experiments.emplace_back(l, std::vector<int>{c}, v);
    }
  }
  return p;
}

std::uint64_t whole_channel_count(const QuantizedNetwork& net, std::size_t level_count,
                                  const std::vector<int>& layers) {
  std::uint64_t channels = 0;
  for (int l : resolve_layers(net, layers)) channels += static_cast<std::uint64_t>(net.layer(l).out_channels);
  return channels * level_count;
}

CampaignPlan plan_pe_combinations(const QuantizedNetwork& net, int layer, int f,
                                  std::vector<std::int32_t> levels) {
  CampaignPlan p;
  p.mode = CampaignMode::pe_combinations;
  p.network_name = net.name();
  p.network_checksum = network_checksum(net);
  p.layers = resolve_layers(net, {layer});
  p.levels = resolve_levels(net, std::move(levels));
  const int c = net.layer(layer).out_channels;
  if (f < 2 || f > c) {
    throw UsageError("PE combinations need 2 <= f <= " + std::to_string(c) + ", got f = " + std::to_string(f));
  }
  p.group_size = f;
  const auto groups = combinations(c, f);
  p.experiments.reserve(groups.size() * p.levels.size());
  for (auto v : p.levels) {
    for (const auto& g : groups) p.experiments.emplace_back(layer, g, v);
  }
  return p;
}

CampaignPlan plan_custom(const QuantizedNetwork& net, std::vector<FaultSpec> experiments) {
  CampaignPlan p;
  p.mode = CampaignMode::custom;
  p.network_name = net.name();
  p.network_checksum = network_checksum(net);
  std::set<int> layers;
  std::set<std::int32_t> levels;
  std::size_t widest = 0;
  for (const auto& f : experiments) {
    validate_fault(net, f);
    layers.insert(f.layer);
    levels.insert(f.level);
    widest = std::max(widest, f.channels.size());
  }
  p.layers.assign(layers.begin(), layers.end());
  p.levels.assign(levels.begin(), levels.end());
  p.group_size = static_cast<int>(widest);
  p.experiments = std::move(experiments);
  return p;
}

std::optional<std::int64_t> CampaignResult::find(const FaultSpec& fault) const {
  const auto it = index_.find(fault);
  if (it == index_.end()) return std::nullopt;
  return records[it->second].correct;
}

void CampaignResult::add(ExperimentResult r) {
  index_.emplace(r.fault, records.size());
  records.push_back(std::move(r));
}

CampaignResult run_campaign(const QuantizedNetwork& net, const LabeledDataset& data,
                            const CampaignPlan& plan, const RunOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  if (data.size() == 0) throw UsageError("campaign needs a non-empty dataset");
  if (data.shape != net.input_shape()) {
    throw StructuralError("dataset shape " + data.shape.str() + " does not match network input " +
                          net.input_shape().str());
  }
  if (plan.network_checksum != network_checksum(net)) {
    throw UsageError("plan was built for a different network than '" + net.name() + "'");
  }
  for (const auto& f : plan.experiments) validate_fault(net, f);

  const std::uint32_t dataset_crc = dataset_checksum(data);
  const json header = store_header(plan, dataset_crc, data.size());

  CampaignResult result;
  result.plan_hash = plan.hash();
  result.mode = plan.mode;
  result.network_name = plan.network_name;
  result.total = data.size();
  result.planned = plan.size();

  const bool persist = !options.store.empty();
  std::optional<std::int64_t> stored_baseline;
  StoreWriter writer;
  if (persist && options.resume && std::filesystem::exists(options.store)) {
    StoreContents s = read_store(options.store);
    const std::pair<const char*, const char*> checks[] = {
        {"plan_hash", "plan"}, {"network_crc", "network"}, {"dataset_crc", "dataset"}, {"images", "dataset size"}};
    for (const auto& [key, what] : checks) {
      if (s.header.value(key, json()) != header.at(key)) {
        throw UsageError("campaign store " + options.store.string() + " was written for a different " +
                         what + "; refusing to resume");
      }
    }
    if (s.records.size() > plan.size()) throw UsageError("campaign store holds more records than the plan");
    for (std::size_t i = 0; i < s.records.size(); ++i) {
      if (s.records[i].fault != plan.experiments[i]) {
        throw UsageError("campaign store record " + std::to_string(i) + " (" + s.records[i].fault.key() +
                         ") does not follow the plan; refusing to resume");
      }
      result.add(std::move(s.records[i]));
    }
    stored_baseline = s.baseline;
    // Drop a torn tail before appending.
    {
      std::ofstream rewrite(options.store, std::ios::binary | std::ios::trunc);
      for (const auto& l : s.valid_lines) rewrite << l << '\n';
      if (!rewrite) throw LoadError("cannot rewrite campaign store " + options.store.string());
    }
    writer = StoreWriter(options.store, false);
  } else if (persist) {
    writer = StoreWriter(options.store, true);
    writer.line(header.dump());
    writer.flush();
  }

  const int jobs = std::max(1, options.jobs);
  const int images = data.size();
  const LevelSet acts = net.quant().activations();

  std::vector<int> base_class(static_cast<std::size_t>(images));
  {
    std::vector<std::int64_t> per_worker(static_cast<std::size_t>(jobs), 0);
    parallel_for(images, jobs, [&](int i, int w) {
      const int k = infer(net, data.image(i, net.input_quant()));
      base_class[static_cast<std::size_t>(i)] = k;
      if (k == data.labels[static_cast<std::size_t>(i)]) ++per_worker[static_cast<std::size_t>(w)];
    });
    result.baseline = 0;
    for (auto c : per_worker) result.baseline += c;
  }
  if (stored_baseline && *stored_baseline != result.baseline) {
    throw UsageError("campaign store baseline differs from this run; refusing to resume");
  }
  if (persist && !stored_baseline) {
    writer.line(json{{"baseline", result.baseline}}.dump());
    writer.flush();
  }

  std::size_t next = result.records.size();
  std::size_t end = plan.size();
  if (options.stop_after >= 0) end = std::min(end, next + static_cast<std::size_t>(options.stop_after));
  const std::size_t batch = static_cast<std::size_t>(std::max(1, options.batch_size));

  while (next < end) {
    const std::size_t count = std::min(batch, end - next);
    // Effective fault per experiment after masking.
    std::vector<std::optional<FaultSpec>> effective(count);
    std::vector<RowVector<std::int32_t>> stuck(count);
    int min_layer = net.layer_count();
    for (std::size_t e = 0; e < count; ++e) {
      const FaultSpec& planned = plan.experiments[next + e];
      std::optional<FaultSpec> f = options.fault_filter ? options.fault_filter(planned) : planned;
      if (f && f->channels.empty()) f.reset();
      if (f) {
        validate_fault(net, *f);
        stuck[e] = stuck_threshold_row(net, f->layer, f->level);
        min_layer = std::min(min_layer, f->layer);
      }
      effective[e] = std::move(f);
    }

    std::vector<std::vector<std::int64_t>> counts(static_cast<std::size_t>(jobs), std::vector<std::int64_t>(count, 0));
    parallel_for(images, jobs, [&](int i, int w) {
      auto& mine = counts[static_cast<std::size_t>(w)];
      const int label = data.labels[static_cast<std::size_t>(i)];
      const int base = base_class[static_cast<std::size_t>(i)];
      std::vector<LayerTrace> tr;
      if (min_layer < net.layer_count()) tr = trace(net, data.image(i, net.input_quant()));
      for (std::size_t e = 0; e < count; ++e) {
        int k = base;
        if (const auto& f = effective[e]) {
          const LayerTrace& lt = tr[static_cast<std::size_t>(f->layer)];
          FeatureMap out = lt.output;
          bool changed = false;
          for (int c : f->channels) {
            for (Eigen::Index p = 0; p < lt.accumulators.rows(); ++p) {
              const std::int32_t v = threshold_activation(acts, stuck[e], lt.accumulators(p, c));
              if (v != out.data(p, c)) {
                out.data(p, c) = v;
                changed = true;
              }
            }
          }
          if (changed) k = argmax_class(scores_from(net, f->layer + 1, std::move(out)));
        }
        if (k == label) ++mine[e];
      }
    });

    for (std::size_t e = 0; e < count; ++e) {
      ExperimentResult r{plan.experiments[next + e], 0};
      for (const auto& per : counts) r.correct += per[e];
      writer.line(record_line(r));
      result.add(std::move(r));
    }
    writer.flush();
    next += count;
    if (options.progress) options.progress(next, plan.size());
  }

  result.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

CampaignResult load_campaign_result(const std::filesystem::path& store) {
  StoreContents s = read_store(store);
  CampaignResult r;
  try {
    r.plan_hash = s.header.at("plan_hash").get<std::uint32_t>();
    r.mode = campaign_mode_from_string(s.header.at("mode").get<std::string>());
    r.network_name = s.header.at("network").get<std::string>();
    r.total = s.header.at("images").get<std::int64_t>();
    r.planned = s.header.at("planned").get<std::size_t>();
  } catch (const json::exception& e) {
    throw LoadError("campaign store header in " + store.string() + " is malformed: " + e.what());
  } catch (const UsageError& e) {
    throw LoadError(e.what());
  }
  if (!s.baseline) throw LoadError("campaign store " + store.string() + " has no baseline record");
  r.baseline = *s.baseline;
  for (auto& rec : s.records) r.add(std::move(rec));
  return r;
}

CampaignSummary summarize(const CampaignResult& result) {
  CampaignSummary s;
  s.total = result.total;
  s.baseline = result.baseline;
  std::map<std::pair<int, std::int32_t>, SummaryRow> per_layer;
  std::map<std::int32_t, SummaryRow> overall;
  auto fold = [](SummaryRow& row, const ExperimentResult& r) {
    if (row.experiments == 0 || r.correct < row.min_correct) {
      row.min_correct = r.correct;
      row.min_channels = r.fault.channels;
      row.min_layer = r.fault.layer;
    }
    if (row.experiments == 0 || r.correct > row.max_correct) {
      row.max_correct = r.correct;
      row.max_channels = r.fault.channels;
      row.max_layer = r.fault.layer;
    }
    ++row.experiments;
  };
  for (const auto& r : result.records) {
    auto& row = per_layer[{r.fault.layer, r.fault.level}];
    row.layer = r.fault.layer;
    row.level = r.fault.level;
    fold(row, r);
    auto& all = overall[r.fault.level];
    all.layer = -1;
    all.level = r.fault.level;
    fold(all, r);
  }
  for (auto& [k, row] : per_layer) s.rows.push_back(std::move(row));
  for (auto& [k, row] : overall) s.rows.push_back(std::move(row));
  return s;
}

std::string results_csv(const CampaignResult& result) {
  std::ostringstream out;
  out << "layer,channels,level,correct,total,accuracy\n";
  for (const auto& r : result.records) {
    out << r.fault.layer << ',' << join_channels(r.fault.channels, ' ') << ',' << r.fault.level << ','
        << r.correct << ',' << result.total << ',' << format_percent(result.accuracy_percent(r.correct)) << '\n';
  }
  return out.str();
}

std::string summary_csv(const CampaignSummary& summary) {
  auto pct = [&](std::int64_t c) {
    return format_percent(summary.total == 0 ? 0.0 : 100.0 * static_cast<double>(c) / static_cast<double>(summary.total));
  };
  std::ostringstream out;
  out << "layer,level,baseline_correct,min_correct,min_layer,min_channels,max_correct,max_layer,"
         "max_channels,total,baseline_accuracy,min_accuracy,max_accuracy\n";
  for (const auto& r : summary.rows) {
    out << (r.layer < 0 ? std::string("all") : std::to_string(r.layer)) << ',' << r.level << ','
        << summary.baseline << ',' << r.min_correct << ',' << r.min_layer << ','
        << join_channels(r.min_channels, ' ') << ',' << r.max_correct << ',' << r.max_layer << ','
        << join_channels(r.max_channels, ' ') << ',' << summary.total << ',' << pct(summary.baseline)
        << ',' << pct(r.min_correct) << ',' << pct(r.max_correct) << '\n';
  }
  return out.str();
}

std::string table_row(const CampaignSummary& summary, const std::string& name,
                      const std::vector<std::int32_t>& levels) {
  auto pct = [&](std::int64_t c) {
    return format_percent(summary.total == 0 ? 0.0 : 100.0 * static_cast<double>(c) / static_cast<double>(summary.total));
  };
  std::string s = name + " " + pct(summary.baseline);
  for (auto v : levels) {
    const auto it = std::find_if(summary.rows.begin(), summary.rows.end(),
                                 [&](const SummaryRow& r) { return r.layer < 0 && r.level == v; });
    if (it == summary.rows.end()) {
      s += " -- --";
    } else {
      s += " " + pct(it->min_correct) + " " + pct(it->max_correct);
    }
  }
  return s;
}

AccuracyTable build_accuracy_matrix(const CampaignResult& result, int layer, std::int32_t level,
                                    int channels, int group_size) {
  AccuracyTable t(channels, group_size);
  t.layer_id = layer;
  t.level = level;
  for (const auto& g : combinations(channels, group_size)) {
    const auto v = result.find(FaultSpec(layer, g, level));
    if (!v) {
      throw StructuralError("campaign has no experiment for " + FaultSpec(layer, g, level).key());
    }
    t.set(g, *v);
  }
  return t;
}

}  // namespace qnnfault
