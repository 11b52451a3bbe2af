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

#include <fstream>
#include <map>

#include "fixtures.hpp"
#include "qnnfault/campaign.hpp"
#include "qnnfault/error.hpp"
#include "qnnfault/inference.hpp"
#include "qnnfault/synthetic.hpp"

using namespace qnnfault;

namespace {

std::map<FaultSpec, std::int64_t> serial_oracle(const QuantizedNetwork& net, const LabeledDataset& data,
                                               const CampaignPlan& plan) {
  std::map<FaultSpec, std::int64_t> out;
  for (const auto& f : plan.experiments) out[f] = evaluate(inject(net, f).network(), data).correct;
  return out;
}

std::map<FaultSpec, std::int64_t> as_map(const CampaignResult& r) {
  std::map<FaultSpec, std::int64_t> out;
  for (const auto& e : r.records) out[e.fault] = e.correct;
  return out;
}

std::vector<FaultSpec> faults_of(const CampaignResult& r) {
  std::vector<FaultSpec> out;
  for (const auto& e : r.records) out.push_back(e.fault);
  return out;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "qnnfault-test-campaign";
  std::filesystem::create_directories(dir);
  const auto p = dir / name;
  std::filesystem::remove(p);
  return p;
}

}  // namespace

TEST_CASE("binomials and lexicographic combinations") {
  CHECK(binomial(64, 2) == 2016);
  CHECK(binomial(64, 4) == 635376);
  CHECK(binomial(4, 4) == 1);
  CHECK(binomial(3, 5) == 0);
  const auto c = combinations(4, 2);
  CHECK(c == std::vector<std::vector<int>>{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
  CHECK(combinations(64, 4).size() == 635376);
}

TEST_CASE("whole-channel plan sizes on the CNV topology") {
  const QuantizedNetwork w1a1 = generate_synthetic(cnv_spec({1, 1}));
  CHECK(whole_channel_count(w1a1, 2) == 3840);
  CHECK(plan_whole_channel(w1a1, all_levels(w1a1)).size() == 3840);
  const QuantizedNetwork w1a2 = generate_synthetic(cnv_spec({1, 2}));
  const CampaignPlan p = plan_whole_channel(w1a2, all_levels(w1a2));
  CHECK(p.size() == 5760);
  CHECK(p.levels == std::vector<std::int32_t>{-1, 0, 1});
  CHECK(p.experiments.front() == FaultSpec(0, {0}, -1));
  CHECK(p.experiments[64] == FaultSpec(0, {0}, 0));

  const CampaignPlan pairs = plan_pe_combinations(w1a1, 0, 2, {-1, 1});
  CHECK(pairs.size() == 2 * 2016);
  CHECK(pairs.experiments[1] == FaultSpec(0, {0, 2}, -1));
  for (const auto& f : pairs.experiments) {
    REQUIRE(f.channels.size() == 2);
    REQUIRE(f.channels[0] < f.channels[1]);
  }
}

TEST_CASE("plan validation") {
  const QuantizedNetwork toy = generate_synthetic(toy_spec({1, 1}));
  CHECK(plan_whole_channel(toy, {1}, {0}).size() == 4);
  CHECK(plan_pe_combinations(toy, 0, 4, {1}).size() == 1);
  CHECK_THROWS_AS(plan_pe_combinations(toy, 0, 1, {1}), UsageError);
  CHECK_THROWS_AS(plan_pe_combinations(toy, 0, 5, {1}), UsageError);
  CHECK_THROWS_AS(plan_whole_channel(toy, {0}), UsageError);
  CHECK_THROWS_AS(plan_whole_channel(toy, {}), UsageError);
  CHECK_THROWS_AS(plan_whole_channel(toy, {1}, {2}), UsageError);
  CHECK_THROWS_AS(plan_custom(toy, {FaultSpec(0, {9}, 1)}), UsageError);
}

TEST_CASE("campaign matches a serial inject-and-evaluate loop") {
  for (const QuantSpec& q : testing::all_precisions()) {
    CAPTURE(q.name());
    const QuantizedNetwork toy = generate_synthetic(toy_spec(q, 3));
    const LabeledDataset data = generate_dataset(toy, 200, 4);
    const CampaignPlan whole = plan_whole_channel(toy, all_levels(toy));
    const CampaignResult r = run_campaign(toy, data, whole);
    CHECK(r.complete());
    CHECK(r.baseline == evaluate(toy, data).correct);
    CHECK(faults_of(r) == whole.experiments);
    CHECK(as_map(r) == serial_oracle(toy, data, whole));

    const CampaignPlan pairs = plan_pe_combinations(toy, 0, 2, all_levels(toy));
    CHECK(as_map(run_campaign(toy, data, pairs, {.batch_size = 5})) == serial_oracle(toy, data, pairs));
  }

  const QuantizedNetwork desk = generate_synthetic(desk_spec({2, 2}, 5));
  const LabeledDataset data = generate_dataset(desk, 80, 6);
  const CampaignPlan plan = plan_whole_channel(desk, all_levels(desk), {2, 4});
  CHECK(as_map(run_campaign(desk, data, plan, {.jobs = 2})) == serial_oracle(desk, data, plan));
}

TEST_CASE("results do not depend on worker count or batching") {
  const QuantizedNetwork desk = generate_synthetic(desk_spec({1, 2}, 7));
  const LabeledDataset data = generate_dataset(desk, 120, 8);
  const CampaignPlan plan = plan_whole_channel(desk, all_levels(desk));
  const CampaignResult serial = run_campaign(desk, data, plan, {.jobs = 1});
  for (int jobs : {2, 3, 7}) {
    for (int batch : {1, 13, 1000}) {
      const CampaignResult par = run_campaign(desk, data, plan, {.jobs = jobs, .batch_size = batch});
      REQUIRE(par.records.size() == serial.records.size());
      CHECK(as_map(par) == as_map(serial));
      CHECK(faults_of(par) == faults_of(serial));
    }
  }
}

TEST_CASE("an interrupted campaign resumes to the same result") {
  const QuantizedNetwork desk = generate_synthetic(desk_spec({1, 1}, 9));
  const LabeledDataset data = generate_dataset(desk, 100, 10);
  const CampaignPlan plan = plan_whole_channel(desk, all_levels(desk));
  const CampaignResult full = run_campaign(desk, data, plan);
  const auto store = scratch("resume.jsonl");

  const auto half = static_cast<std::int64_t>(plan.size() / 2);
  const CampaignResult partial =
      run_campaign(desk, data, plan, {.store = store, .stop_after = half, .batch_size = 7});
  CHECK_FALSE(partial.complete());
  CHECK(static_cast<std::int64_t>(partial.records.size()) == half);
  CHECK(load_campaign_result(store).records.size() == partial.records.size());

  // A torn trailing append is discarded on resume.
  { std::ofstream(store, std::ios::app) << R"({"layer":0,"chan)"; }
  std::size_t executed = 0;
  const CampaignResult resumed = run_campaign(
      desk, data, plan,
      {.store = store, .resume = true, .batch_size = 7, .progress = [&](std::size_t done, std::size_t) {
         executed = done;
       }});
  CHECK(resumed.complete());
  CHECK(executed == plan.size());
  CHECK(faults_of(resumed) == faults_of(full));
  CHECK(as_map(resumed) == as_map(full));
  CHECK(summary_csv(summarize(resumed)) == summary_csv(summarize(full)));

  const CampaignResult reloaded = load_campaign_result(store);
  CHECK(reloaded.complete());
  CHECK(reloaded.baseline == full.baseline);
  CHECK(results_csv(reloaded) == results_csv(full));

  // Resuming a finished store runs nothing new.
  std::size_t calls = 0;
  run_campaign(desk, data, plan, {.store = store, .resume = true, .progress = [&](std::size_t, std::size_t) { ++calls; }});
  CHECK(calls == 0);
  CHECK(load_campaign_result(store).records.size() == plan.size());
}

TEST_CASE("resume refuses a store written for another plan or dataset") {
  const QuantizedNetwork desk = generate_synthetic(desk_spec({1, 1}, 9));
  const LabeledDataset data = generate_dataset(desk, 50, 10);
  const CampaignPlan plan = plan_whole_channel(desk, {1});
  const auto store = scratch("mismatch.jsonl");
  run_campaign(desk, data, plan, {.store = store, .stop_after = 3});
  CHECK_THROWS_AS(run_campaign(desk, data, plan_whole_channel(desk, {-1}), {.store = store, .resume = true}),
                  UsageError);
  CHECK_THROWS_AS(run_campaign(desk, data.subset(40), plan, {.store = store, .resume = true}), UsageError);
  CHECK_NOTHROW(run_campaign(desk, data, plan, {.store = store, .resume = true}));

  std::ofstream(scratch("garbage.jsonl")) << "not a store\n";
  CHECK_THROWS_AS(load_campaign_result(scratch("garbage.jsonl")), LoadError);
}

TEST_CASE("fault filter masks or narrows faults") {
  const QuantizedNetwork desk = generate_synthetic(desk_spec({1, 1}, 11));
  const LabeledDataset data = generate_dataset(desk, 60, 12);
  const CampaignPlan plan = plan_whole_channel(desk, all_levels(desk), {0});
  const CampaignResult masked =
      run_campaign(desk, data, plan, {.fault_filter = [](const FaultSpec&) { return std::optional<FaultSpec>{}; }});
  for (const auto& e : masked.records) CHECK(e.correct == masked.baseline);

  const CampaignPlan pairs = plan_custom(desk, {FaultSpec(0, {1, 2}, 1), FaultSpec(0, {3, 4}, -1)});
  const CampaignResult narrowed = run_campaign(desk, data, pairs, {.fault_filter = [](const FaultSpec& f) {
                                                 return std::optional<FaultSpec>{FaultSpec(f.layer, {f.channels[0]}, f.level)};
                                               }});
  CHECK(narrowed.records[0].correct == evaluate(inject(desk, FaultSpec(0, {1}, 1)).network(), data).correct);
  CHECK(narrowed.records[1].correct == evaluate(inject(desk, FaultSpec(0, {3}, -1)).network(), data).correct);
  CHECK(narrowed.records[0].fault == FaultSpec(0, {1, 2}, 1));
}

TEST_CASE("summaries report min and max per layer and level") {
  CampaignResult r;
  r.total = 1000;
  r.baseline = 900;
  r.add({FaultSpec(0, {0}, 1), 900});
  r.add({FaultSpec(0, {1}, 1), 850});
  r.add({FaultSpec(0, {2}, 1), 910});
  r.add({FaultSpec(2, {0}, 1), 800});
  r.add({FaultSpec(2, {1}, 1), 800});
  const CampaignSummary s = summarize(r);
  REQUIRE(s.rows.size() == 3);
  CHECK(s.rows[0].layer == 0);
  CHECK(s.rows[0].min_correct == 850);
  CHECK(s.rows[0].min_channels == std::vector<int>{1});
  CHECK(s.rows[0].max_correct == 910);  // above baseline, not clamped
  CHECK(s.rows[1].min_channels == std::vector<int>{0});  // first of a tie
  CHECK(s.rows[2].layer == -1);
  CHECK(s.rows[2].min_correct == 800);
  CHECK(s.rows[2].min_layer == 2);
  CHECK(s.rows[2].max_layer == 0);
  CHECK(s.rows[2].experiments == 5);

  CampaignResult flat;
  flat.total = 10;
  flat.baseline = 7;
  for (int c = 0; c < 4; ++c) flat.add({FaultSpec(0, {c}, -1), 7});
  const SummaryRow row = summarize(flat).rows.back();
  CHECK(row.min_correct == 7);
  CHECK(row.max_correct == 7);
}

TEST_CASE("summary renders as a table row") {
  CampaignResult r;
  r.total = 10000;
  r.baseline = 7922;
  r.add({FaultSpec(0, {3}, -1), 7530});
  r.add({FaultSpec(1, {8}, -1), 7976});
  r.add({FaultSpec(0, {5}, 1), 7301});
  r.add({FaultSpec(3, {1}, 1), 7969});
  const CampaignSummary s = summarize(r);
  CHECK(table_row(s, "W1A1", {-1, 0, 1}) == "W1A1 79.22 75.30 79.76 -- -- 73.01 79.69");
  const std::string csv = summary_csv(s);
  CHECK(csv.find("all,1,7922,7301,0,5,7969,3,1,10000,79.22,73.01,79.69\n") != std::string::npos);
  CHECK(results_csv(r).find("0,5,1,7301,10000,73.01\n") != std::string::npos);
}

TEST_CASE("accuracy matrix from a pairwise campaign") {
  const QuantizedNetwork toy = generate_synthetic(toy_spec({1, 2}, 2));
  const LabeledDataset data = generate_dataset(toy, 100, 3);
  const CampaignResult r = run_campaign(toy, data, plan_pe_combinations(toy, 0, 2, {-1, 1}));
  const AccuracyTable t = build_accuracy_matrix(r, 0, 1, 4, 2);
  CHECK(t.entry_count() == 6);
  CHECK(t.level == 1);
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      CHECK(t.at(i, j) == *r.find(FaultSpec(0, {i, j}, 1)));
      CHECK(t.at(j, i) == t.at(i, j));
    }
  }
  CHECK(from_dense_csv(to_dense_csv(t)).values().size() == 6);
  CHECK(std::ranges::equal(from_dense_csv(to_dense_csv(t)).values(), t.values()));
  CHECK_THROWS_AS(build_accuracy_matrix(r, 0, 0, 4, 2), StructuralError);
  CHECK_THROWS_AS(build_accuracy_matrix(r, 0, 1, 4, 3), StructuralError);
}
