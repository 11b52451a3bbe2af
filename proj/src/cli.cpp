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

#include "qnnfault/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qnnfault/campaign.hpp"
#include "qnnfault/error.hpp"
#include "qnnfault/injector.hpp"
#include "qnnfault/model_io.hpp"
#include "qnnfault/parallel.hpp"
#include "qnnfault/replication.hpp"
#include "qnnfault/scheduler.hpp"
#include "qnnfault/synthetic.hpp"

namespace qnnfault {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write " + path.string());
  out << text;
  if (!out) throw LoadError("short write to " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

LabeledDataset load_subset(const RunConfig& c) {
  require(!c.dataset.empty(), "--dataset is required");
  return load_dataset(c.dataset).subset(c.subset);
}

QuantizedNetwork load_required_model(const RunConfig& c) {
  require(!c.model.empty(), "--model is required");
  return load_model(c.model);
}

std::string join(const std::vector<int>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + std::to_string(v[i]);
  return s;
}

// Prints a line each time another tenth of the plan is done.
std::function<void(std::size_t, std::size_t)> progress_printer(std::ostream& err, const std::string& what) {
  auto last = std::make_shared<int>(-1);
  return [&err, what, last](std::size_t done, std::size_t planned) {
    const int tenth = planned == 0 ? 10 : static_cast<int>(10 * done / planned);
    if (tenth == *last) return;
    *last = tenth;
    err << what << ": " << done << "/" << planned << " experiments\n";
  };
}

std::int64_t brute_force_max_min(const AccuracyTable& table) {
  const int n = table.channels();
  const auto f = static_cast<std::size_t>(table.group_size());
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  std::int64_t best = std::numeric_limits<std::int64_t>::min();

  // The lowest free channel opens the next group; every completion of it is tried.
  std::function<void(std::int64_t)> solve = [&](std::int64_t cur) {
    if (cur <= best) return;
    const auto it = std::find(used.begin(), used.end(), false);
    if (it == used.end()) {
      best = cur;
      return;
    }
    const int u = static_cast<int>(it - used.begin());
    std::vector<int> group = {u};
    used[static_cast<std::size_t>(u)] = true;
    std::function<void(int)> extend = [&](int from) {
      if (group.size() == f) {
        solve(std::min(cur, table.at(group)));
        return;
      }
      for (int v = from; v < n; ++v) {
        if (used[static_cast<std::size_t>(v)]) continue;
        used[static_cast<std::size_t>(v)] = true;
        group.push_back(v);
        extend(v + 1);
        group.pop_back();
        used[static_cast<std::size_t>(v)] = false;
      }
    };
    extend(u + 1);
    used[static_cast<std::size_t>(u)] = false;
  };
  solve(std::numeric_limits<std::int64_t>::max());
  return best;
}

// Accuracy tables of one layer from a PE-combinations store, combined
// across the requested levels (every level in the store by default).
AccuracyTable table_from_campaign(const CampaignResult& result, int layer, int f,
                                  std::vector<std::int32_t> levels) {
  int channels = 0;
  std::set<std::int32_t> seen;
  for (const auto& r : result.records) {
    if (r.fault.layer != layer) continue;
    channels = std::max(channels, r.fault.channels.back() + 1);
    seen.insert(r.fault.level);
  }
  require(channels > 0, "campaign has no experiments on layer " + std::to_string(layer));
  if (levels.empty()) levels.assign(seen.begin(), seen.end());
  std::vector<AccuracyTable> tables;
  for (auto v : levels) tables.push_back(build_accuracy_matrix(result, layer, v, channels, f));
  return combine_levels(tables);
}

std::vector<std::int32_t> levels_or_all(const RunConfig& c, const QuantizedNetwork& net) {
  return c.levels.empty() ? all_levels(net) : c.levels;
}

std::string plan_file_name(double t) {
  return "plan-t" + format("%g", t) + ".json";
}

}  // namespace

void RunConfig::validate() const {
  require(jobs >= 1, "--jobs must be at least 1");
  require(subset >= 0, "--subset must not be negative");
  require(time_budget > 0, "--time-budget must be positive");
  require(!(resume && overwrite), "--resume and --overwrite exclude each other");
  require(mode == "whole-channel" || mode == "pe-combinations",
          "--mode must be whole-channel or pe-combinations, got '" + mode + "'");
  for (double t : thresholds) require(t >= 0, "thresholds must not be negative");
}

int cmd_campaign(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const QuantizedNetwork net = load_required_model(c);
  CampaignPlan plan;
  if (c.mode == "whole-channel") {
    require(c.layer < 0, "--layer applies to pe-combinations; use --layers");
    plan = plan_whole_channel(net, levels_or_all(c, net), c.layers);
  } else {
    require(c.layer >= 0, "pe-combinations needs --layer");
    require(c.layers.empty(), "--layers applies to whole-channel; use --layer");
    plan = plan_pe_combinations(net, c.layer, c.folding, levels_or_all(c, net));
  }
  out << plan.size() << " experiments\n";
  if (c.dry_run) return kExitOk;

  const LabeledDataset data = load_subset(c);
  RunOptions options;
  options.jobs = c.jobs;
  options.store = c.checkpoint.empty() ? c.out / "results.jsonl" : c.checkpoint;
  options.resume = c.resume;
  options.stop_after = c.stop_after;
  options.progress = progress_printer(err, "campaign");
  require(c.resume || c.overwrite || !fs::exists(options.store),
          options.store.string() + " exists; pass --resume or --overwrite");
  if (options.store.has_parent_path()) fs::create_directories(options.store.parent_path());

  const CampaignResult result = run_campaign(net, data, plan, options);
  if (!result.complete()) {
    out << "stopped at " << result.records.size() << "/" << result.planned
        << " experiments; rerun with --resume\n";
    return kExitOk;
  }
  const CampaignSummary summary = summarize(result);
  write_text(c.out / "results.csv", results_csv(result));
  write_text(c.out / "summary.csv", summary_csv(summary));
  if (plan.mode == CampaignMode::pe_combinations && plan.group_size == 2) {
    const int channels = net.layer(c.layer).out_channels;
    for (auto v : plan.levels) {
      write_text(c.out / ("table-L" + std::to_string(c.layer) + "-V" + std::to_string(v) + ".csv"),
                 to_dense_csv(build_accuracy_matrix(result, c.layer, v, channels, 2)));
    }
  }
  out << "baseline " << format("%.2f", result.accuracy_percent(result.baseline)) << "% on " << result.total
      << " images\n";
  out << table_row(summary, net.name(), plan.levels) << "\n";
  return kExitOk;
}

int cmd_summarize(const RunConfig& c, std::ostream& out, std::ostream&) {
  require(c.campaigns.size() == 1, "summarize needs exactly one --campaign store");
  const CampaignResult result = load_campaign_result(c.campaigns.front());
  require(result.complete(), "campaign store is incomplete (" + std::to_string(result.records.size()) + "/" +
                                 std::to_string(result.planned) + "); resume it first");
  const CampaignSummary summary = summarize(result);
  write_text(c.out / "summary.csv", summary_csv(summary));
  write_text(c.out / "results.csv", results_csv(result));
  std::set<std::int32_t> levels;
  for (const auto& r : result.records) levels.insert(r.fault.level);
  const std::string name = c.name.empty() ? result.network_name : c.name;
  out << table_row(summary, name, {levels.begin(), levels.end()}) << "\n";
  return kExitOk;
}

int cmd_replicate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const QuantizedNetwork net = load_required_model(c);
  const OpsProfile ops = ops_profile(net);
  std::vector<ReplicationPlan> plans;
  require(!c.campaigns.empty() || c.full_tmr, "replicate needs a whole-channel --campaign store or --full-tmr");
  if (!c.campaigns.empty()) {
    require(c.campaigns.size() == 1, "replicate takes one --campaign store");
    const CampaignResult result = load_campaign_result(c.campaigns.front());
    require(result.complete(), "campaign store is incomplete; resume it first");
    for (double t : c.thresholds) plans.push_back(plan_replication(result, t, ops));
  }
  for (const auto& p : plans) write_text(c.out / plan_file_name(p.threshold), json(p).dump(2) + "\n");
  if (!plans.empty()) {
    const std::string table = replication_table_csv(ops, plans);
    write_text(c.out / "replication.csv", table);
    out << table;
  }
  if (c.full_tmr) {
    const ReplicationPlan full = full_tmr_plan(ops);
    write_text(c.out / "plan-full-tmr.json", json(full).dump(2) + "\n");
    out << "full TMR overhead " << format("%.2f", full.overhead_percent) << "%\n";
  }
  if (!c.verify) return kExitOk;

  require(!plans.empty(), "--verify needs at least one threshold");
  const LabeledDataset data = load_subset(c);
  const std::vector<std::int32_t> levels = levels_or_all(c, net);
  bool all_hold = true;
  for (const auto& p : plans) {
    err << "verifying t=" << format("%g", p.threshold) << "\n";
    const ReplicationCheck check = verify_replication(apply_replication(net, p), data, levels, c.jobs);
    out << "t=" << format("%g", p.threshold) << " worst drop " << format("%.4f", check.worst_drop_percent)
        << (check.holds() ? " ok" : " VIOLATED");
    if (check.worst_fault) out << " (" << check.worst_fault->key() << ")";
    out << "\n";
    all_hold = all_hold && check.holds();
  }
  return all_hold ? kExitOk : kExitFailure;
}

int cmd_schedule(const RunConfig& c, std::ostream& out, std::ostream& err) {
  SchedulingInstance instance;
  if (!c.table.empty()) {
    require(c.campaigns.empty(), "--table and --campaign exclude each other");
    instance.table = from_dense_csv(read_text(c.table));
    instance.table.layer_id = std::max(c.layer, 0);
  } else {
    require(c.campaigns.size() == 1, "schedule needs --table or one PE-combinations --campaign store");
    require(c.layer >= 0, "--layer is required with --campaign");
    const CampaignResult result = load_campaign_result(c.campaigns.front());
    require(result.mode == CampaignMode::pe_combinations, "schedule needs a pe-combinations campaign");
    instance.table = table_from_campaign(result, c.layer, c.folding, c.levels);
    instance.table.layer_id = c.layer;
  }
  if (c.m_acc >= 0) instance.m_acc = c.m_acc;
  instance.validate();

  const int n = instance.channels();
  const int f = instance.folding();
  const Schedule def = default_schedule(n, n / f, instance.table.layer_id);
  const WorstCase def_worst = worst_case_of_schedule(def, instance.table);
  SolveOptions options;
  options.time_budget_seconds = c.time_budget;
  const ScheduleSolution best = c.replicated.empty() ? optimal_schedule(instance, options)
                                                     : schedule_with_replication(instance, c.replicated, options);

  json report = best;
  report["default_min_acc"] = def_worst.min_acc;
  report["default_worst_group"] = def_worst.group;
  write_text(c.out / "schedule.json", report.dump(2) + "\n");
  if (f == 2 && c.replicated.empty()) write_text(c.out / "heatmap.csv", heatmap_csv(instance.table, def, best.schedule));

  out << "default worst-case " << def_worst.min_acc << " at {" << join(def_worst.group, ',') << "}\n";
  out << "optimal worst-case " << best.min_acc << " at {" << join(best.worst_group, ',') << "}"
      << (best.optimal ? "" : " (time budget exhausted; best found)") << "\n";
  out << "improvement " << best.min_acc - def_worst.min_acc << "\n";

  if (!c.oracle) return kExitOk;
  require(c.replicated.empty(), "--oracle does not support --replicated");
  require(n <= 16, "--oracle is limited to 16 channels");
  err << "running exhaustive oracle\n";
  const std::int64_t exact = brute_force_max_min(instance.table);
  const bool match = exact == best.min_acc;
  out << "oracle " << exact << (match ? " match" : " MISMATCH") << "\n";
  return match ? kExitOk : kExitFailure;
}

int cmd_pareto(const RunConfig& c, std::ostream& out, std::ostream&) {
  require(c.campaigns.size() == c.models.size(), "each --campaign needs a matching --model");
  std::vector<CostPoint> points;
  for (std::size_t i = 0; i < c.campaigns.size(); ++i) {
    const QuantizedNetwork net = load_model(c.models[i]);
    const CampaignResult result = load_campaign_result(c.campaigns[i]);
    require(result.complete(), c.campaigns[i].string() + " is incomplete; resume it first");
    const auto curve = cost_curve(result, ops_profile(net), net.quant());
    points.insert(points.end(), curve.begin(), curve.end());
  }
  for (const auto& p : c.points) {
    const auto more = cost_points_from_csv(read_text(p));
    points.insert(points.end(), more.begin(), more.end());
  }
  require(!points.empty(), "pareto needs --campaign/--model pairs or --points files");
  const auto frontier = pareto_frontier(points);
  write_text(c.out / "points.csv", cost_csv(points));
  write_text(c.out / "frontier.csv", cost_csv(frontier));
  out << points.size() << " points, " << frontier.size() << " on the frontier\n";
  return kExitOk;
}

int cmd_gen_model(const RunConfig& c, std::ostream& out, std::ostream&) {
  const QuantSpec q = QuantSpec::parse(c.precision);
  SyntheticModelSpec spec;
  if (c.preset == "desk") spec = desk_spec(q, c.seed);
  else if (c.preset == "cnv") spec = cnv_spec(q, c.seed);
  else if (c.preset == "lfc") spec = lfc_spec(q, c.seed);
  else if (c.preset == "toy") spec = toy_spec(q, c.seed);
  else throw UsageError("--preset must be desk, cnv, lfc or toy, got '" + c.preset + "'");

  const QuantizedNetwork net = generate_synthetic(spec);
  save_model(net, c.out);
  out << "wrote " << net.name() << " (" << net.layer_count() << " layers) to " << c.out.string() << "\n";
  if (c.images > 0) {
    const fs::path path = c.dataset.empty() ? c.out / "data.qfd" : c.dataset;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const LabeledDataset data = generate_dataset(net, c.images, c.data_seed, c.label_agreement);
    save_dataset(data, path);
    const Evaluation e = evaluate(net, data, c.jobs);
    out << "wrote " << data.size() << " images to " << path.string() << "; baseline "
        << format("%.2f", 100.0 * e.accuracy()) << "%\n";
  }
  return kExitOk;
}

int cmd_verify_injection(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const QuantizedNetwork net = load_required_model(c);
  RunConfig sized = c;
  if (sized.subset == 0) sized.subset = 100;
  const LabeledDataset data = load_subset(sized);
  const CampaignPlan plan = plan_whole_channel(net, levels_or_all(c, net), c.layers);
  std::vector<std::size_t> mismatches(plan.size(), 0);
  err << "checking " << plan.size() << " faults on " << data.size() << " images\n";
  parallel_for(static_cast<int>(plan.size()), c.jobs, [&](int i, int) {
    const auto check = verify_injection_equivalence(net, plan.experiments[static_cast<std::size_t>(i)], data);
    mismatches[static_cast<std::size_t>(i)] = check.mismatched_images.size();
  });
  std::size_t total = 0;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (mismatches[i] == 0) continue;
    total += mismatches[i];
    out << plan.experiments[i].key() << ": " << mismatches[i] << " mismatched images\n";
  }
  out << plan.size() << " faults x " << data.size() << " images, " << total << " mismatches\n";
  return total == 0 ? kExitOk : kExitFailure;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fault injection, selective replication and fault-aware scheduling for QNN accelerators",
               "qnnfault"};
  app.set_config("--config", "", "TOML file supplying any flag; the command line wins");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  RunConfig c;
  auto model = [&](CLI::App* s) { s->add_option("--model", c.model, "Model directory or manifest"); };
  auto dataset = [&](CLI::App* s) {
    s->add_option("--dataset", c.dataset, "Dataset file (.qfd)");
    s->add_option("--subset", c.subset, "Use the first N images (0: all)");
  };
  auto levels = [&](CLI::App* s) {
    s->add_option("--levels", c.levels, "Stuck levels, comma separated (default: all)")->delimiter(',');
  };
  auto jobs = [&](CLI::App* s) { s->add_option("--jobs", c.jobs, "Worker threads"); };
  auto outdir = [&](CLI::App* s) { s->add_option("--out", c.out, "Output directory"); };
  auto campaigns = [&](CLI::App* s) { s->add_option("--campaign", c.campaigns, "Campaign result store"); };

  auto* campaign = app.add_subcommand("campaign", "Run a fault-injection campaign");
  model(campaign), dataset(campaign), levels(campaign), jobs(campaign), outdir(campaign);
  campaign->add_option("--mode", c.mode, "whole-channel or pe-combinations");
  campaign->add_option("--layers", c.layers, "Layers for whole-channel mode (default: all)")->delimiter(',');
  campaign->add_option("--layer", c.layer, "Layer for pe-combinations mode");
  campaign->add_option("--folding", c.folding, "Channels per PE for pe-combinations mode");
  campaign->add_option("--checkpoint", c.checkpoint, "Result store (default: <out>/results.jsonl)");
  campaign->add_flag("--dry-run", c.dry_run, "Print the experiment count and exit");
  campaign->add_flag("--resume", c.resume, "Continue an interrupted store");
  campaign->add_flag("--overwrite", c.overwrite, "Start over when the store exists");
  campaign->add_option("--stop-after", c.stop_after, "Stop after N new experiments");

  auto* summarize_cmd = app.add_subcommand("summarize", "Rewrite summary CSVs from a result store");
  campaigns(summarize_cmd), outdir(summarize_cmd);
  summarize_cmd->add_option("--name", c.name, "Row label for the table line");

  auto* replicate = app.add_subcommand("replicate", "Plan selective channel triplication");
  model(replicate), dataset(replicate), levels(replicate), jobs(replicate), outdir(replicate),
      campaigns(replicate);
  replicate->add_option("--thresholds", c.thresholds, "Accuracy-drop thresholds in points")->delimiter(',');
  replicate->add_flag("--full-tmr", c.full_tmr, "Also emit the full-TMR plan");
  replicate->add_flag("--verify", c.verify, "Re-run the campaign on each protected network");

  auto* schedule = app.add_subcommand("schedule", "Find the fault-aware channel-to-PE schedule");
  levels(schedule), outdir(schedule), campaigns(schedule);
  schedule->add_option("--table", c.table, "Dense pairwise accuracy CSV");
  schedule->add_option("--layer", c.layer, "Layer of the campaign to schedule");
  schedule->add_option("--folding", c.folding, "Channels per PE");
  schedule->add_option("--m-acc", c.m_acc, "Upper bound on any entry (default: largest entry)");
  schedule->add_option("--replicated", c.replicated, "Channels on protected PEs")->delimiter(',');
  schedule->add_option("--time-budget", c.time_budget, "Seconds for the f > 2 search");
  schedule->add_flag("--oracle", c.oracle, "Check against exhaustive search");

  auto* pareto = app.add_subcommand("pareto", "Cost versus worst-case error frontier");
  outdir(pareto), campaigns(pareto);
  pareto->add_option("--model", c.models, "Model of each --campaign, in the same order");
  pareto->add_option("--points", c.points, "Cost CSV files to merge");

  auto* gen = app.add_subcommand("gen-model", "Write a synthetic model and dataset");
  outdir(gen), jobs(gen);
  gen->add_option("--preset", c.preset, "desk, cnv, lfc or toy");
  gen->add_option("--precision", c.precision, "WxAy, e.g. W1A1");
  gen->add_option("--seed", c.seed, "Model seed");
  gen->add_option("--images", c.images, "Dataset size (0: no dataset)");
  gen->add_option("--dataset", c.dataset, "Dataset path (default: <out>/data.qfd)");
  gen->add_option("--data-seed", c.data_seed, "Dataset seed");
  gen->add_option("--label-agreement", c.label_agreement, "Fraction of labels equal to the prediction");

  auto* verify = app.add_subcommand("verify-injection", "Compare threshold injection with output forcing");
  model(verify), dataset(verify), levels(verify), jobs(verify);
  verify->add_option("--layers", c.layers, "Layers to check (default: all)")->delimiter(',');

  std::vector<std::string> owned = {"qnnfault"};
  owned.insert(owned.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : owned) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const std::map<const CLI::App*, int (*)(const RunConfig&, std::ostream&, std::ostream&)> commands = {
      {campaign, cmd_campaign}, {summarize_cmd, cmd_summarize}, {replicate, cmd_replicate},
      {schedule, cmd_schedule}, {pareto, cmd_pareto},           {gen, cmd_gen_model},
      {verify, cmd_verify_injection}};
  const CLI::App* chosen = app.get_subcommands().front();
  c.subcommand = chosen->get_name();
  try {
    c.validate();
    return commands.at(chosen)(c, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace qnnfault
