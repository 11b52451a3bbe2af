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
#include <iosfwd>
#include <string>
#include <vector>

namespace qnnfault {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Every flag of every subcommand. Fields a subcommand does not use keep
/// their defaults.
struct RunConfig {
  std::string subcommand;
  std::filesystem::path model;
  std::filesystem::path dataset;
  std::filesystem::path out = ".";
  std::filesystem::path checkpoint;  // campaign store; defaults to <out>/results.jsonl

  std::string mode = "whole-channel";
  std::vector<std::int32_t> levels;  // empty: every legal level
  std::vector<int> layers;           // empty: every thresholded layer
  int layer = -1;
  int folding = 2;
  std::vector<double> thresholds = {0.5, 1, 2};
  int jobs = 1;
  int subset = 0;  // 0: whole dataset
  double time_budget = 60;

  bool dry_run = false;
  bool resume = false;
  bool overwrite = false;
  std::int64_t stop_after = -1;
  bool verify = false;
  bool full_tmr = false;
  bool oracle = false;

  std::vector<std::filesystem::path> campaigns;
  std::vector<std::filesystem::path> models;
  std::vector<std::filesystem::path> points;
  std::filesystem::path table;
  std::vector<int> replicated;
  std::int64_t m_acc = -1;
  std::string name;

  std::string preset = "desk";
  std::string precision = "W1A1";
  std::uint64_t seed = 1;
  int images = 0;
  std::uint64_t data_seed = 7;
  double label_agreement = 0.8;

  // UsageError on inconsistent flags.
  void validate() const;
};

// Each returns an exit code. Reports go to `out`, progress to `err`, data
// to files under config.out.
int cmd_campaign(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_summarize(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_replicate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_schedule(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_pareto(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_gen_model(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_verify_injection(const RunConfig& config, std::ostream& out, std::ostream& err);

// Parses `args` (program name excluded) and dispatches. Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qnnfault
