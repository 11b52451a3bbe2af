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

#include <random>

#include "fixtures.hpp"
#include "reference.hpp"
#include "qnnfault/error.hpp"
#include "qnnfault/inference.hpp"
#include "qnnfault/replication.hpp"
#include "qnnfault/synthetic.hpp"

using namespace qnnfault;

namespace {

// Hand-derived MACs of the CNV topology (3x3 valid convs, 2x2 pools,
// fc 256*1 -> 512 -> 512 -> 10).
const std::vector<std::int64_t> kCnvMacs = {
    30 * 30 * 9 * 3 * 64,    28 * 28 * 9 * 64 * 64,   12 * 12 * 9 * 64 * 128,
    10 * 10 * 9 * 128 * 128, 3 * 3 * 9 * 128 * 256,  1 * 1 * 9 * 256 * 256,
    256 * 512,               512 * 512,               512 * 10};

// Whole-channel result where channel c of layer l loses drops[{l, c}] images.
CampaignResult fixture_result(const OpsProfile& ops, int thresholded_layers, std::int64_t total,
                              std::int64_t baseline, const std::map<std::pair<int, int>, std::int64_t>& drops,
                              const std::vector<std::int32_t>& levels = {-1, 1}) {
  CampaignResult r;
  r.total = total;
  r.baseline = baseline;
  for (int i = 0; i < thresholded_layers; ++i) {
    const LayerOps& l = ops.layers[static_cast<std::size_t>(i)];
    for (auto v : levels) {
      for (int c = 0; c < l.channels; ++c) {
        const auto it = drops.find({l.layer, c});
        const std::int64_t d = it == drops.end() ? 0 : it->second;
        // the worst level carries the full drop, the others half of it
        r.add({FaultSpec(l.layer, {c}, v), baseline - (v == levels.back() ? d : d / 2)});
      }
    }
  }
  r.planned = r.records.size();
  return r;
}

}  // namespace

TEST_CASE("ops profile of the CNV topology") {
  const QuantizedNetwork cnv = generate_synthetic(cnv_spec({1, 1}));
  const OpsProfile ops = ops_profile(cnv);
  REQUIRE(ops.layers.size() == kCnvMacs.size());
  std::int64_t total = 0;
  for (std::size_t i = 0; i < kCnvMacs.size(); ++i) {
    CHECK(ops.layers[i].macs == kCnvMacs[i]);
    total += kCnvMacs[i];
  }
  CHECK(ops.total() == total);
  CHECK(ops.total() == 59461376);
  CHECK(ops.of(0).per_channel() == 30 * 30 * 9 * 3);
  CHECK_THROWS_AS(ops.of(2), UsageError);  // maxpool
}

TEST_CASE("CNV-W1A1 channel counts reproduce the operation overhead") {
  const OpsProfile ops = ops_profile(generate_synthetic(cnv_spec({1, 1})));
  const auto overhead = [&](std::vector<int> counts) {
    ChannelSets s;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      for (int c = 0; c < counts[i]; ++c) s[ops.layers[i].layer].push_back(c);
    }
    return plan_for_channels(s, 0, ops).overhead_percent;
  };
  CHECK(overhead({2, 24, 35, 9, 0, 0, 0, 0}) == doctest::Approx(49.87).epsilon(0.00005));
  CHECK(overhead({7, 51, 80, 75, 8, 0, 0, 0}) == doctest::Approx(129.70).epsilon(0.00005));
  CHECK(overhead({17, 63, 106, 113, 87, 0, 0, 0}) == doctest::Approx(173.47).epsilon(0.00005));
  CHECK(overhead({12, 64, 121, 125, 168, 0, 0, 0}) == doctest::Approx(186.24).epsilon(0.00005));
  CHECK(full_tmr_plan(ops).overhead_percent == 200.0);
  CHECK(overhead({}) == 0.0);
}

TEST_CASE("critical channels from a stored CNV-shaped campaign") {
  const OpsProfile ops = ops_profile(generate_synthetic(cnv_spec({1, 1})));
  // 2% of 10000 images is 200; channels 5 and 9 of layer 0 exceed it.
  const CampaignResult r = fixture_result(ops, 8, 10000, 7922,
                                          {{{0, 5}, 621}, {{0, 9}, 201}, {{0, 3}, 200}, {{7, 1}, 150}});
  const ChannelSets two = critical_channels(r, 2.0);
  CHECK(two == ChannelSets{{0, {5, 9}}});
  CHECK(critical_channels(r, 1.0) == ChannelSets{{0, {3, 5, 9}}, {7, {1}}});
  CHECK(critical_channels(r, 100).empty());
  CHECK(plan_replication(r, 100, ops).overhead_percent == 0.0);

  const auto risks = channel_risks(r);
  const auto it = std::find_if(risks.begin(), risks.end(), [](const ChannelRisk& c) { return c.layer == 0 && c.channel == 5; });
  CHECK(it->worst_correct == 7922 - 621);
  CHECK(it->worst_level == 1);

  CampaignResult gap = r;
  gap.records.pop_back();
  CampaignResult partial;
  partial.total = gap.total;
  partial.baseline = gap.baseline;
  for (const auto& e : gap.records) partial.add(e);
  CHECK_THROWS_AS(plan_replication(partial, 2, ops), UsageError);
}

TEST_CASE("overhead falls as the tolerated drop grows") {
  const QuantizedNetwork desk = generate_synthetic(desk_spec({1, 2}, 3));
  const LabeledDataset data = generate_dataset(desk, 150, 4);
  const CampaignResult r = run_campaign(desk, data, plan_whole_channel(desk, all_levels(desk)));
  const OpsProfile ops = ops_profile(desk);
  double previous = 200.0;
  for (double t : {-1.0, 0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0}) {
    const ReplicationPlan p = plan_replication(r, t, ops);
    CHECK(p.overhead_percent <= previous);
    CHECK(p.overhead_percent < 200.0);  // the classifier head is never triplicated here
    previous = p.overhead_percent;
  }
}

TEST_CASE("a single fragile channel is the only critical one") {
  // fc 4 -> 3 with binary activations; the head reads only hidden channel 0.
  const WeightMatrix hidden = testing::weights_from(3, 4, {1, 1, 1, 1, 1, -1, 1, -1, -1, 1, 1, -1});
  const WeightMatrix head = testing::weights_from(2, 3, {1, 0, 0, -1, 0, 0});
  ThresholdMatrix th(3, 1);
  th << 0, 0, 0;
  const QuantizedNetwork net("fragile", {2, 1}, InputQuant{}, {1, 1, 4},
                             {Layer::make_fc(4, 3, hidden, th), Layer::make_fc(3, 2, head, ThresholdMatrix(2, 0))});
  std::vector<std::vector<std::int32_t>> images = testing::enumerate_inputs(4, {-1, 1});
  std::vector<std::uint16_t> labels;
  for (const auto& img : images) labels.push_back(static_cast<std::uint16_t>(infer(net, testing::feature_map({1, 1, 4}, img))));
  const LabeledDataset data = testing::dataset_from({1, 1, 4}, images, labels);
  const CampaignResult r = run_campaign(net, data, plan_whole_channel(net, {-1, 1}));
  CHECK(r.baseline == 16);
  CHECK(critical_channels(r, 1.0) == ChannelSets{{0, {0}}});

  const ProtectedNetwork p = apply_replication(net, plan_replication(r, 1.0, ops_profile(net)));
  CHECK(p.evaluate(FaultSpec(0, {0}, -1), data).correct == 16);
  CHECK(p.evaluate(FaultSpec(0, {1}, -1), data).correct == *r.find(FaultSpec(0, {1}, -1)));
  const ReplicationCheck check = verify_replication(p, data, {-1, 1});
  CHECK(check.holds());
  CHECK(check.worst_drop_percent == 0.0);
}

TEST_CASE("replication bounds the re-campaign worst-case drop") {
  for (const QuantSpec& q : {QuantSpec{1, 1}, QuantSpec{2, 2}}) {
    CAPTURE(q.name());
    const QuantizedNetwork desk = generate_synthetic(desk_spec(q, 12));
    const LabeledDataset data = generate_dataset(desk, 120, 13);
    const auto levels = all_levels(desk);
    const CampaignResult r = run_campaign(desk, data, plan_whole_channel(desk, levels));
    const OpsProfile ops = ops_profile(desk);
    for (double t : {0.0, 1.0, 3.0}) {
      const ProtectedNetwork p = apply_replication(desk, plan_replication(r, t, ops));
      const ReplicationCheck check = verify_replication(p, data, levels);
      CHECK(check.holds());
      CHECK(check.worst_drop_percent <= t);
      for (const auto& [layer, channels] : p.plan().channels) {
        for (int c : channels) CHECK(p.evaluate(FaultSpec(layer, {c}, levels.front()), data).correct == r.baseline);
      }
    }
  }
}

TEST_CASE("replication plan JSON and table export") {
  const OpsProfile ops = ops_profile(generate_synthetic(cnv_spec({1, 1})));
  ChannelSets s{{0, {2, 7}}, {3, {1}}};
  const ReplicationPlan p = plan_for_channels(s, 2.0, ops);
  nlohmann::json j = p;
  const ReplicationPlan back = j.get<ReplicationPlan>();
  CHECK(back.channels == p.channels);
  CHECK(back.overhead_percent == p.overhead_percent);
  CHECK(back.triplicated_ops == p.triplicated_ops);

  const std::string csv = replication_table_csv(ops, {plan_for_channels({}, 0.5, ops), p});
  CHECK(csv.rfind("layer,type,channels,>0.50,>2.00\n0,conv,64,0,2\n", 0) == 0);
  CHECK(csv.find("\n3,conv,128,0,1\n") != std::string::npos);
  CHECK(csv.find("\n10,fc,10,0,0\n") != std::string::npos);
  CHECK_THROWS_AS(plan_for_channels({{0, {64}}}, 0, ops), UsageError);
}

TEST_CASE("Pareto frontier") {
  auto pt = [](double cost, double err) { return CostPoint{{1, 1}, 0, err, cost}; };
  CHECK_THROWS_AS(pareto_frontier({}), UsageError);
  CHECK(pareto_frontier({pt(1, 1)}).size() == 1);
  CHECK(pareto_frontier({pt(2, 1), pt(1, 2)}).size() == 2);
  const auto f = pareto_frontier({pt(3, 3), pt(1, 5), pt(2, 5), pt(2, 1), pt(4, 1)});
  REQUIRE(f.size() == 2);
  CHECK(f[0].hardware_cost == 1);
  CHECK(f[1].hardware_cost == 2);
  CHECK(f[1].worst_error_percent == 1);

  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<CostPoint> cloud;
    for (int i = 0; i < 100; ++i) cloud.push_back(pt(static_cast<double>(rng() % 40), static_cast<double>(rng() % 40)));
    const auto brute = testing::dominance_filter(cloud);
    const auto fast = pareto_frontier(cloud);
    REQUIRE(fast.size() == brute.size());
    for (const auto& p : brute) {
      CHECK(std::count_if(fast.begin(), fast.end(), [&](const CostPoint& q) {
              return q.hardware_cost == p.hardware_cost && q.worst_error_percent == p.worst_error_percent;
            }) >= 1);
    }
    for (std::size_t i = 1; i < fast.size(); ++i) CHECK(fast[i - 1].hardware_cost <= fast[i].hardware_cost);
  }
}

TEST_CASE("cost curves and the cost CSV") {
  const QuantizedNetwork desk = generate_synthetic(desk_spec({1, 2}, 3));
  const LabeledDataset data = generate_dataset(desk, 100, 4);
  const CampaignResult r = run_campaign(desk, data, plan_whole_channel(desk, all_levels(desk)));
  const OpsProfile ops = ops_profile(desk);
  const auto curve = cost_curve(r, ops, {1, 2});
  REQUIRE_FALSE(curve.empty());
  CHECK(curve.front().hardware_cost == doctest::Approx(ops.total() * 1.6 * 2));
  CHECK(curve.back().worst_error_percent == doctest::Approx(100.0 - r.accuracy_percent(r.baseline)));
  for (std::size_t i = 1; i < curve.size(); ++i) {
    CHECK(curve[i].hardware_cost >= curve[i - 1].hardware_cost);
    CHECK(curve[i].worst_error_percent <= curve[i - 1].worst_error_percent);
  }
  const auto back = cost_points_from_csv(cost_csv(curve));
  REQUIRE(back.size() == curve.size());
  for (std::size_t i = 0; i < curve.size(); ++i) {
    CHECK(back[i].precision == curve[i].precision);
    CHECK(back[i].hardware_cost == doctest::Approx(curve[i].hardware_cost));
    CHECK(back[i].worst_error_percent == doctest::Approx(curve[i].worst_error_percent));
  }
  CHECK_THROWS_AS(cost_points_from_csv("precision,cost,worst_error\nW0A1,1,1\n"), LoadError);
  CHECK_THROWS_AS(cost_points_from_csv("nope\n"), LoadError);
}
