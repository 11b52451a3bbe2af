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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qnnfault/accuracy_table.hpp"
#include "qnnfault/campaign.hpp"
#include "qnnfault/cli.hpp"
#include "qnnfault/replication.hpp"

using namespace qnnfault;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "qnnfault-test-cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

// Desk-scale model plus a 200-image dataset under `dir`.
fs::path make_model(const fs::path& dir, const std::string& preset = "desk", const std::string& prec = "W1A2") {
  const Run r = cli({"gen-model", "--preset", preset, "--precision", prec, "--images", "200", "--out",
                     (dir / "model").string()});
  REQUIRE(r.code == kExitOk);
  return dir / "model";
}

}  // namespace

TEST_CASE("exit codes") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"campaign", "--no-such-flag"}).code == kExitUsage);
  CHECK(cli({"campaign", "--help"}).code == kExitOk);
  CHECK(cli({"campaign", "--model", "/nonexistent/model"}).code == kExitFailure);
  CHECK(cli({"gen-model", "--preset", "huge", "--out", scratch("bad-preset").string()}).code == kExitUsage);
  CHECK(cli({"gen-model", "--precision", "W9A1", "--out", scratch("bad-prec").string()}).code == kExitUsage);

  const auto dir = scratch("exit-codes");
  const auto model = make_model(dir);
  CHECK(cli({"campaign", "--model", model.string(), "--jobs", "0", "--dry-run"}).code == kExitUsage);
  CHECK(cli({"campaign", "--model", model.string(), "--mode", "sideways", "--dry-run"}).code == kExitUsage);
  CHECK(cli({"campaign", "--model", model.string(), "--mode", "pe-combinations", "--dry-run"}).code == kExitUsage);
  CHECK(cli({"campaign", "--model", model.string(), "--levels", "5", "--dry-run"}).code == kExitUsage);
  const Run no_data = cli({"campaign", "--model", model.string(), "--out", (dir / "c").string()});
  CHECK(no_data.code == kExitUsage);
  CHECK(no_data.err.find("--dataset") != std::string::npos);
}

TEST_CASE("campaign prints the experiment count of a CNV-shaped network") {
  const auto dir = scratch("cnv");
  REQUIRE(cli({"gen-model", "--preset", "cnv", "--precision", "W1A1", "--out", (dir / "m").string()}).code ==
          kExitOk);
  const Run r = cli({"campaign", "--model", (dir / "m").string(), "--dry-run", "--out", (dir / "c").string()});
  CHECK(r.code == kExitOk);
  CHECK(r.out == "3840 experiments\n");
  CHECK_FALSE(fs::exists(dir / "c"));
  const Run combos = cli({"campaign", "--model", (dir / "m").string(), "--dry-run", "--mode", "pe-combinations",
                          "--layer", "0", "--folding", "2"});
  CHECK(combos.out == "4032 experiments\n");
}

TEST_CASE("resumed campaign writes the same files as an uninterrupted one") {
  const auto dir = scratch("resume");
  const auto model = make_model(dir);
  const std::vector<std::string> base = {"campaign", "--model", model.string(), "--dataset",
                                         (model / "data.qfd").string()};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return cli(a);
  };

  const Run full = with({"--out", (dir / "full").string()});
  REQUIRE(full.code == kExitOk);
  CHECK(full.out.find("240 experiments") == 0);
  CHECK(full.err.find("240/240") != std::string::npos);

  const Run half = with({"--out", (dir / "part").string(), "--stop-after", "120", "--jobs", "2"});
  REQUIRE(half.code == kExitOk);
  CHECK(half.out.find("stopped at 120/240") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "part" / "summary.csv"));
  // A kill mid-append leaves a torn final line.
  {
    std::ofstream store(dir / "part" / "results.jsonl", std::ios::app | std::ios::binary);
    store << R"({"layer":0,"channels":[)";
  }
  CHECK(with({"--out", (dir / "part").string()}).code == kExitUsage);
  REQUIRE(with({"--out", (dir / "part").string(), "--resume", "--jobs", "3"}).code == kExitOk);

  CHECK(slurp(dir / "part" / "summary.csv") == slurp(dir / "full" / "summary.csv"));
  CHECK(slurp(dir / "part" / "results.csv") == slurp(dir / "full" / "results.csv"));

  const Run again = with({"--out", (dir / "full").string(), "--overwrite", "--jobs", "2"});
  REQUIRE(again.code == kExitOk);
  CHECK(again.out == full.out);

  const Run sum = cli({"summarize", "--campaign", (dir / "full" / "results.jsonl").string(), "--out",
                       (dir / "sum").string(), "--name", "DESK"});
  REQUIRE(sum.code == kExitOk);
  CHECK(sum.out.rfind("DESK ", 0) == 0);
  CHECK(slurp(dir / "sum" / "summary.csv") == slurp(dir / "full" / "summary.csv"));
}

TEST_CASE("config file supplies flags and the command line wins") {
  const auto dir = scratch("config");
  const auto model = make_model(dir);
  spit(dir / "run.toml", "[campaign]\nmodel = \"" + model.string() + "\"\nlevels = [1]\ndry-run = true\njobs = 0\n");
  const Run bad = cli({"--config", (dir / "run.toml").string(), "campaign"});
  CHECK(bad.code == kExitUsage);
  const Run ok = cli({"--config", (dir / "run.toml").string(), "campaign", "--jobs", "2"});
  CHECK(ok.code == kExitOk);
  CHECK(ok.out == "80 experiments\n");
  spit(dir / "typo.toml", "[campaign]\nmodle = \"x\"\n");
  CHECK(cli({"--config", (dir / "typo.toml").string(), "campaign"}).code == kExitUsage);
}

TEST_CASE("replicate writes one plan per threshold and verifies") {
  const auto dir = scratch("replicate");
  const auto model = make_model(dir, "toy", "W2A2");
  const std::string data = (model / "data.qfd").string();
  REQUIRE(cli({"campaign", "--model", model.string(), "--dataset", data, "--out", (dir / "c").string()}).code ==
          kExitOk);
  const Run r = cli({"replicate", "--model", model.string(), "--campaign", (dir / "c" / "results.jsonl").string(),
                     "--thresholds", "0.5,1,2", "--full-tmr", "--verify", "--dataset", data, "--out",
                     (dir / "rep").string()});
  REQUIRE(r.code == kExitOk);
  for (const char* f : {"plan-t0.5.json", "plan-t1.json", "plan-t2.json", "plan-full-tmr.json"}) {
    CHECK(fs::exists(dir / "rep" / f));
  }
  CHECK(r.out.find("full TMR overhead 200.00%") != std::string::npos);
  CHECK(r.out.find("VIOLATED") == std::string::npos);
  CHECK(r.out.find("t=0.5 worst drop") != std::string::npos);

  ReplicationPlan plan = nlohmann::json::parse(slurp(dir / "rep" / "plan-t1.json"));
  CHECK(plan.threshold == 1.0);
  const ReplicationPlan full = nlohmann::json::parse(slurp(dir / "rep" / "plan-full-tmr.json"));
  CHECK(full.overhead_percent == 200.0);
  CHECK(slurp(dir / "rep" / "replication.csv").rfind("layer,type,channels,>0.50,>1.00,>2.00\n", 0) == 0);

  CHECK(cli({"replicate", "--model", model.string(), "--out", (dir / "rep").string()}).code == kExitUsage);
}

TEST_CASE("schedule reports improvement and matches the oracle") {
  const auto dir = scratch("schedule");

  AccuracyTable flat(8, 2, 40);
  spit(dir / "flat.csv", to_dense_csv(flat));
  const Run c = cli({"schedule", "--table", (dir / "flat.csv").string(), "--out", (dir / "flat").string()});
  REQUIRE(c.code == kExitOk);
  CHECK(c.out.find("improvement 0\n") != std::string::npos);

  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    AccuracyTable t(10, 2);
    for (auto& v : t.values()) v = static_cast<std::int64_t>(rng() % 1000);
    spit(dir / "rand.csv", to_dense_csv(t));
    const Run r = cli({"schedule", "--table", (dir / "rand.csv").string(), "--oracle", "--out",
                       (dir / "rand").string()});
    CHECK(r.code == kExitOk);
    CHECK(r.out.find(" match\n") != std::string::npos);
  }

  // Heatmap marks 5 default and 5 optimal pairs, each in both orders.
  const std::string heat = slurp(dir / "rand" / "heatmap.csv");
  std::istringstream lines(heat);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "i,j,correct,default,optimal");
  int rows = 0, def = 0, opt = 0;
  while (std::getline(lines, line)) {
    ++rows;
    def += line[line.size() - 3] == '1';
    opt += line.back() == '1';
  }
  CHECK(rows == 90);
  CHECK(def == 10);
  CHECK(opt == 10);

  const auto sol = nlohmann::json::parse(slurp(dir / "rand" / "schedule.json"));
  CHECK(sol.at("pes").size() == 5);
  CHECK(sol.at("min_acc").get<std::int64_t>() >= sol.at("default_min_acc").get<std::int64_t>());
}

TEST_CASE("schedule from a PE-combinations campaign") {
  const auto dir = scratch("schedule-campaign");
  const auto model = make_model(dir, "toy", "W1A2");
  REQUIRE(cli({"campaign", "--model", model.string(), "--dataset", (model / "data.qfd").string(), "--mode",
               "pe-combinations", "--layer", "0", "--folding", "2", "--out", (dir / "c").string()})
              .code == kExitOk);
  CHECK(fs::exists(dir / "c" / "table-L0-V1.csv"));
  const Run r = cli({"schedule", "--campaign", (dir / "c" / "results.jsonl").string(), "--layer", "0", "--oracle",
                     "--out", (dir / "s").string()});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find(" match\n") != std::string::npos);
  const Run one = cli({"schedule", "--campaign", (dir / "c" / "results.jsonl").string(), "--layer", "0",
                       "--levels", "1", "--out", (dir / "s1").string()});
  CHECK(one.code == kExitOk);
  const Run table = cli({"schedule", "--table", (dir / "c" / "table-L0-V1.csv").string(), "--out",
                         (dir / "s2").string()});
  CHECK(table.out == one.out);
  CHECK(cli({"schedule", "--out", (dir / "s3").string()}).code == kExitUsage);
}

TEST_CASE("pareto frontier from cost CSVs") {
  const auto dir = scratch("pareto");
  spit(dir / "one.csv", "precision,cost,worst_error\nW1A1,10.0,5.0000\n");
  REQUIRE(cli({"pareto", "--points", (dir / "one.csv").string(), "--out", (dir / "o1").string()}).code == kExitOk);
  CHECK(slurp(dir / "o1" / "frontier.csv") == slurp(dir / "one.csv"));

  spit(dir / "two.csv", "precision,cost,worst_error\nW2A2,20.0,6.0000\nW2A2,30.0,1.0000\n");
  const Run r = cli({"pareto", "--points", (dir / "one.csv").string(), "--points", (dir / "two.csv").string(),
                     "--out", (dir / "o2").string()});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out == "3 points, 2 on the frontier\n");
  CHECK(slurp(dir / "o2" / "frontier.csv") ==
        "precision,cost,worst_error\nW1A1,10.0,5.0000\nW2A2,30.0,1.0000\n");
  CHECK(cost_points_from_csv(slurp(dir / "o2" / "points.csv")).size() == 3);

  CHECK(cli({"pareto", "--out", (dir / "o3").string()}).code == kExitUsage);
  spit(dir / "bad.csv", "precision,cost\nW1A1,x\n");
  CHECK(cli({"pareto", "--points", (dir / "bad.csv").string(), "--out", (dir / "o4").string()}).code ==
        kExitFailure);
}

TEST_CASE("pareto from campaigns of two precisions") {
  const auto dir = scratch("pareto-campaigns");
  std::vector<std::string> args = {"pareto", "--out", (dir / "p").string()};
  for (const char* prec : {"W1A1", "W2A2"}) {
    const auto model = make_model(dir / prec, "toy", prec);
    REQUIRE(cli({"campaign", "--model", model.string(), "--dataset", (model / "data.qfd").string(), "--out",
                 (dir / prec / "c").string()})
                .code == kExitOk);
    args.insert(args.end(), {"--campaign", (dir / prec / "c" / "results.jsonl").string(), "--model",
                             model.string()});
  }
  REQUIRE(cli(args).code == kExitOk);
  const auto points = cost_points_from_csv(slurp(dir / "p" / "points.csv"));
  const auto frontier = cost_points_from_csv(slurp(dir / "p" / "frontier.csv"));
  CHECK(frontier.size() <= points.size());
  CHECK(cost_csv(pareto_frontier(points)) == slurp(dir / "p" / "frontier.csv"));
}

TEST_CASE("verify-injection reports zero mismatches") {
  const auto dir = scratch("verify");
  const auto model = make_model(dir, "toy", "W2A2");
  const Run r = cli({"verify-injection", "--model", model.string(), "--dataset", (model / "data.qfd").string(),
                     "--jobs", "2"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find(", 0 mismatches") != std::string::npos);
}
