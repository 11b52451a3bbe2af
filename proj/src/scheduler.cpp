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

#include "qnnfault/scheduler.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <limits>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "qnnfault/campaign.hpp"
#include "qnnfault/error.hpp"

namespace qnnfault {

namespace {

using Groups = std::vector<std::vector<int>>;

// Edmonds' blossom algorithm on a dense graph restricted to alive vertices.
class Blossom {
 public:
  Blossom(const std::vector<std::vector<char>>& adj, const std::vector<char>& alive)
      : n_(static_cast<int>(adj.size())), adj_(adj), alive_(alive) {}

  // Grows `match` to a maximum matching; returns true when it is perfect on
  // the alive vertices.
  bool augment(std::vector<int>& match) {
    match_ = &match;
    for (int v = 0; v < n_; ++v) {
      if (!alive_[idx(v)] || m(v) != -1) continue;
      int u = find_path(v);
      while (u != -1) {
        const int pv = p_[idx(u)];
        const int ppv = m(pv);
        set(u, pv);
        set(pv, u);
        u = ppv;
      }
    }
    for (int v = 0; v < n_; ++v) {
      if (alive_[idx(v)] && m(v) == -1) return false;
    }
    return true;
  }

 private:
  static std::size_t idx(int v) { return static_cast<std::size_t>(v); }
  int m(int v) const { return (*match_)[idx(v)]; }
  void set(int v, int to) { (*match_)[idx(v)] = to; }

  int lca(int a, int b) {
    std::vector<char> seen(idx(n_), 0);
    for (;;) {
      a = base_[idx(a)];
      seen[idx(a)] = 1;
      if (m(a) == -1) break;
      a = p_[idx(m(a))];
    }
    for (;;) {
      b = base_[idx(b)];
      if (seen[idx(b)]) return b;
      b = p_[idx(m(b))];
    }
  }

  void mark_path(int v, int b, int child) {
    while (base_[idx(v)] != b) {
      blossom_[idx(base_[idx(v)])] = blossom_[idx(base_[idx(m(v))])] = 1;
      p_[idx(v)] = child;
      child = m(v);
      v = p_[idx(m(v))];
    }
  }

  int find_path(int root) {
    used_.assign(idx(n_), 0);
    p_.assign(idx(n_), -1);
    base_.resize(idx(n_));
    std::iota(base_.begin(), base_.end(), 0);
    used_[idx(root)] = 1;
    std::queue<int> q;
    q.push(root);
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      for (int to = 0; to < n_; ++to) {
        if (!alive_[idx(to)] || !adj_[idx(v)][idx(to)]) continue;
        if (base_[idx(v)] == base_[idx(to)] || m(v) == to) continue;
        if (to == root || (m(to) != -1 && p_[idx(m(to))] != -1)) {
          const int cur = lca(v, to);
          blossom_.assign(idx(n_), 0);
          mark_path(v, cur, to);
          mark_path(to, cur, v);
          for (int i = 0; i < n_; ++i) {
            if (blossom_[idx(base_[idx(i)])]) {
              base_[idx(i)] = cur;
              if (!used_[idx(i)]) {
                used_[idx(i)] = 1;
                q.push(i);
              }
            }
          }
        } else if (p_[idx(to)] == -1) {
          p_[idx(to)] = v;
          if (m(to) == -1) return to;
          used_[idx(m(to))] = 1;
          q.push(m(to));
        }
      }
    }
    return -1;
  }

  int n_;
  const std::vector<std::vector<char>>& adj_;
  const std::vector<char>& alive_;
  std::vector<int>* match_ = nullptr;
  std::vector<int> p_, base_;
  std::vector<char> used_, blossom_;
};

std::vector<std::vector<char>> edges_at_least(const AccuracyTable& t, std::int64_t theta) {
  const int n = t.channels();
  std::vector<std::vector<char>> adj(static_cast<std::size_t>(n), std::vector<char>(static_cast<std::size_t>(n), 0));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      adj[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = adj[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] =
          t.at(i, j) >= theta ? 1 : 0;
    }
  }
  return adj;
}

std::optional<std::vector<int>> perfect_matching(const AccuracyTable& t, std::int64_t theta) {
  const auto adj = edges_at_least(t, theta);
  const std::vector<char> alive(static_cast<std::size_t>(t.channels()), 1);
  std::vector<int> match(static_cast<std::size_t>(t.channels()), -1);
  if (!Blossom(adj, alive).augment(match)) return std::nullopt;
  return match;
}

ScheduleSolution solve_pairs(const AccuracyTable& t) {
  std::vector<std::int64_t> values(t.values().begin(), t.values().end());
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  // values.front() is always feasible: the complete graph on an even vertex count.
  std::size_t lo = 0, hi = values.size() - 1;
  std::vector<int> match = *perfect_matching(t, values[lo]);
  while (lo < hi) {
    const std::size_t mid = (lo + hi + 1) / 2;
    if (auto m = perfect_matching(t, values[mid])) {
      lo = mid;
      match = std::move(*m);
    } else {
      hi = mid - 1;
    }
  }
  const std::int64_t theta = values[lo];

  const int n = t.channels();
  const auto adj = edges_at_least(t, theta);
  std::vector<char> alive(static_cast<std::size_t>(n), 1);
  Groups groups;
  for (int u = 0; u < n; ++u) {
    if (!alive[static_cast<std::size_t>(u)]) continue;
    alive[static_cast<std::size_t>(u)] = 0;
    for (int v = u + 1; v < n; ++v) {
      if (!alive[static_cast<std::size_t>(v)] || !adj[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)]) continue;
      alive[static_cast<std::size_t>(v)] = 0;
      if (match[static_cast<std::size_t>(u)] == v) {
        groups.push_back({u, v});
        break;
      }
      std::vector<int> trial = match;
      trial[static_cast<std::size_t>(trial[static_cast<std::size_t>(u)])] = -1;
      trial[static_cast<std::size_t>(trial[static_cast<std::size_t>(v)])] = -1;
      trial[static_cast<std::size_t>(u)] = v;
      trial[static_cast<std::size_t>(v)] = u;
      if (Blossom(adj, alive).augment(trial)) {
        match = std::move(trial);
        groups.push_back({u, v});
        break;
      }
      alive[static_cast<std::size_t>(v)] = 1;
    }
  }
  ScheduleSolution s;
  s.schedule = schedule_from_groups(groups, t.layer_id);
  s.optimal = true;
  return s;
}

class PartitionSearch {
 public:
  PartitionSearch(const AccuracyTable& t, std::int64_t incumbent, Groups incumbent_groups, double budget)
      : t_(t),
        f_(t.group_size()),
        best_(incumbent),
        best_groups_(std::move(incumbent_groups)),
        assigned_(static_cast<std::size_t>(t.channels()), 0),
        deadline_(std::chrono::steady_clock::now() + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                          std::chrono::duration<double>(budget))) {}

  void run() { descend(std::numeric_limits<std::int64_t>::max()); }
  bool timed_out() const { return timed_out_; }
  const Groups& best_groups() const { return best_groups_; }

 private:
  bool out_of_time() {
    if (timed_out_) return true;
    if (++nodes_ % 1024 == 0 && std::chrono::steady_clock::now() > deadline_) timed_out_ = true;
    return timed_out_;
  }

  void descend(std::int64_t current) {
    if (out_of_time()) return;
    int u = 0;
    const int n = t_.channels();
    while (u < n && assigned_[static_cast<std::size_t>(u)]) ++u;
    if (u == n) {
      if (current > best_) {
        best_ = current;
        best_groups_ = groups_;
      }
      return;
    }
    std::vector<int> free;
    for (int v = u + 1; v < n; ++v) {
      if (!assigned_[static_cast<std::size_t>(v)]) free.push_back(v);
    }
    std::vector<int> group(static_cast<std::size_t>(f_));
    group[0] = u;
    std::vector<int> pick(static_cast<std::size_t>(f_ - 1));
    std::iota(pick.begin(), pick.end(), 0);
    const int k = f_ - 1;
    const int m = static_cast<int>(free.size());
    while (true) {
      for (int i = 0; i < k; ++i) group[static_cast<std::size_t>(i + 1)] = free[static_cast<std::size_t>(pick[static_cast<std::size_t>(i)])];
      const std::int64_t value = std::min(current, t_.at(group));
      if (value > best_) {
        for (int c : group) assigned_[static_cast<std::size_t>(c)] = 1;
        groups_.push_back(group);
        descend(value);
        groups_.pop_back();
        for (int c : group) assigned_[static_cast<std::size_t>(c)] = 0;
        if (timed_out_) return;
      }
      int i = k - 1;
      while (i >= 0 && pick[static_cast<std::size_t>(i)] == m - k + i) --i;
      if (i < 0) break;
      ++pick[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < k; ++j) pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
    }
  }

  const AccuracyTable& t_;
  int f_;
  std::int64_t best_;
  Groups best_groups_;
  Groups groups_;
  std::vector<char> assigned_;
  std::chrono::steady_clock::time_point deadline_;
  std::uint64_t nodes_ = 0;
  bool timed_out_ = false;
};

void finish(ScheduleSolution& s, const AccuracyTable& t) {
  const WorstCase w = worst_case_of_schedule(s.schedule, t);
  s.min_acc = w.min_acc;
  s.worst_group = w.group;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

void SchedulingInstance::validate() const {
  if (table.entry_count() == 0) throw UsageError("scheduling instance has an empty accuracy table");
  if (channels() % folding() != 0) {
    throw UsageError(std::to_string(channels()) + " channels cannot be split into groups of " +
                     std::to_string(folding()));
  }
  if (m_acc && *m_acc < table.max_entry()) {
    throw UsageError("M_acc " + std::to_string(*m_acc) + " is below the table entry " +
                     std::to_string(table.max_entry()));
  }
}

WorstCase worst_case_of_schedule(const Schedule& schedule, const AccuracyTable& table) {
  if (schedule.channel_count() != table.channels()) {
    throw UsageError("schedule covers " + std::to_string(schedule.channel_count()) + " channels, table " +
                     std::to_string(table.channels()));
  }
  WorstCase w;
  const auto groups = schedule.groups();
  for (std::size_t pe = 0; pe < groups.size(); ++pe) {
    if (static_cast<int>(groups[pe].size()) != table.group_size()) {
      throw UsageError("PE " + std::to_string(pe) + " holds " + std::to_string(groups[pe].size()) +
                       " channels; the table describes groups of " + std::to_string(table.group_size()));
    }
    const std::int64_t v = table.at(groups[pe]);
    if (w.pe < 0 || v < w.min_acc) {
      w.min_acc = v;
      w.pe = static_cast<int>(pe);
      w.group = groups[pe];
    }
  }
  return w;
}

ScheduleSolution optimal_schedule(const SchedulingInstance& instance, const SolveOptions& options) {
  instance.validate();
  const AccuracyTable& t = instance.table;
  const int f = instance.folding();
  const int n = instance.channels();
  ScheduleSolution s;
  if (f == 1 || f == n) {
    Groups g;
    if (f == n) {
      g.emplace_back(static_cast<std::size_t>(n));
      std::iota(g[0].begin(), g[0].end(), 0);
    } else {
      for (int c = 0; c < n; ++c) g.push_back({c});
    }
    s.schedule = schedule_from_groups(g, t.layer_id);
    s.optimal = true;
  } else if (f == 2) {
    s = solve_pairs(t);
  } else {
    const Schedule fallback = default_schedule(n, n / f, t.layer_id);
    PartitionSearch search(t, worst_case_of_schedule(fallback, t).min_acc - 1, fallback.groups(),
                           options.time_budget_seconds);
    search.run();
    Groups g = search.best_groups();
    std::sort(g.begin(), g.end());
    s.schedule = schedule_from_groups(g, t.layer_id);
    s.optimal = !search.timed_out();
  }
  finish(s, t);
  return s;
}

AccuracyTable combine_levels(const std::vector<AccuracyTable>& per_level) {
  if (per_level.empty()) throw UsageError("no accuracy tables to combine");
  AccuracyTable out = per_level.front();
  for (std::size_t i = 1; i < per_level.size(); ++i) {
    const AccuracyTable& t = per_level[i];
    if (t.channels() != out.channels() || t.group_size() != out.group_size() || t.layer_id != out.layer_id) {
      throw UsageError("accuracy tables to combine differ in layer or shape");
    }
    auto dst = out.values();
    const auto src = t.values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = std::min(dst[k], src[k]);
  }
  if (per_level.size() > 1) out.level.reset();
  return out;
}

ScheduleSolution schedule_with_replication(const SchedulingInstance& instance, const std::vector<int>& replicated,
                                           const SolveOptions& options) {
  const int n = instance.channels();
  const int f = instance.folding();
  std::set<int> rep(replicated.begin(), replicated.end());
  if (!rep.empty() && (*rep.begin() < 0 || *rep.rbegin() >= n)) {
    throw UsageError("replicated channel out of range for " + std::to_string(n) + " channels");
  }
  std::vector<int> remaining;
  for (int c = 0; c < n; ++c) {
    if (!rep.count(c)) remaining.push_back(c);
  }
  const int r = static_cast<int>(remaining.size());
  if (r % f != 0) {
    throw UsageError(std::to_string(r) + " unreplicated channels cannot be split into groups of " +
                     std::to_string(f));
  }
  if (instance.m_acc && *instance.m_acc < instance.table.max_entry()) {
    throw UsageError("M_acc " + std::to_string(*instance.m_acc) + " is below the table entry " +
                     std::to_string(instance.table.max_entry()));
  }

  Groups groups;
  ScheduleSolution s;
  if (r == 0) {
    s.min_acc = instance.bound();
    s.optimal = true;
  } else {
    SchedulingInstance sub;
    sub.table = AccuracyTable(r, f);
    sub.table.layer_id = instance.table.layer_id;
    sub.table.level = instance.table.level;
    sub.m_acc = instance.m_acc;
    std::vector<int> original(static_cast<std::size_t>(f));
    for (const auto& g : combinations(r, f)) {
      for (int i = 0; i < f; ++i) original[static_cast<std::size_t>(i)] = remaining[static_cast<std::size_t>(g[static_cast<std::size_t>(i)])];
      sub.table.set(g, instance.table.at(original));
    }
    const ScheduleSolution inner = optimal_schedule(sub, options);
    for (auto g : inner.schedule.groups()) {
      for (int& c : g) c = remaining[static_cast<std::size_t>(c)];
      groups.push_back(std::move(g));
    }
    s.min_acc = inner.min_acc;
    s.optimal = inner.optimal;
    for (int c : inner.worst_group) s.worst_group.push_back(remaining[static_cast<std::size_t>(c)]);
  }
  std::vector<int> rep_sorted(rep.begin(), rep.end());
  for (std::size_t i = 0; i < rep_sorted.size(); i += static_cast<std::size_t>(f)) {
    s.protected_pes.push_back(static_cast<int>(groups.size()));
    groups.emplace_back(rep_sorted.begin() + static_cast<std::ptrdiff_t>(i),
                        rep_sorted.begin() + static_cast<std::ptrdiff_t>(std::min(rep_sorted.size(), i + static_cast<std::size_t>(f))));
  }
  s.schedule = schedule_from_groups(groups, instance.table.layer_id);
  return s;
}

std::vector<FoldingPoint> folding_sweep(const QuantizedNetwork& net, int layer, const LabeledDataset& data,
                                        const std::vector<int>& foldings, const std::vector<std::int32_t>& levels,
                                        int jobs) {
  if (layer < 0 || layer >= net.layer_count() || !net.layer(layer).thresholded()) {
    throw UsageError("layer " + std::to_string(layer) + " is not a thresholded conv/fc layer");
  }
  const int c = net.layer(layer).out_channels;
  std::vector<FoldingPoint> out;
  for (int f : foldings) {
    if (f < 1 || f > c) {
      throw UsageError("folding factor " + std::to_string(f) + " outside 1.." + std::to_string(c));
    }
    const int pe = (c + f - 1) / f;
    const auto groups = default_schedule(c, pe, layer).groups();
    std::vector<FaultSpec> faults;
    for (auto v : levels) {
      for (const auto& g : groups) faults.emplace_back(layer, g, v);
    }
    RunOptions options;
    options.jobs = jobs;
    const CampaignResult r = run_campaign(net, data, plan_custom(net, faults), options);
    for (std::size_t li = 0; li < levels.size(); ++li) {
      FoldingPoint p;
      p.folding = f;
      p.pe_count = pe;
      p.level = levels[li];
      p.total = r.total;
      std::int64_t sum = 0;
      for (std::size_t k = 0; k < groups.size(); ++k) {
        const std::int64_t v = r.records[li * groups.size() + k].correct;
        sum += v;
        if (k == 0 || v < p.min_correct) p.min_correct = v;
        if (k == 0 || v > p.max_correct) p.max_correct = v;
      }
      p.average_correct = static_cast<double>(sum) / static_cast<double>(groups.size());
      out.push_back(p);
    }
  }
  return out;
}

std::string folding_csv(const std::vector<FoldingPoint>& points) {
  std::ostringstream out;
  out << "folding,pe_count,level,average_accuracy,min_accuracy,max_accuracy,spread\n";
  for (const auto& p : points) {
    const double scale = p.total == 0 ? 0.0 : 100.0 / static_cast<double>(p.total);
    out << p.folding << ',' << p.pe_count << ',' << p.level << ',' << fixed(p.average_correct * scale, 2) << ','
        << fixed(static_cast<double>(p.min_correct) * scale, 2) << ','
        << fixed(static_cast<double>(p.max_correct) * scale, 2) << ','
        << fixed(static_cast<double>(p.max_correct - p.min_correct) * scale, 2) << '\n';
  }
  return out.str();
}

void to_json(nlohmann::json& j, const ScheduleSolution& s) {
  nlohmann::json pes = nlohmann::json::array();
  const auto groups = s.schedule.groups();
  for (std::size_t pe = 0; pe < groups.size(); ++pe) pes.push_back({{"pe", pe}, {"channels", groups[pe]}});
  j = nlohmann::json{{"layer", s.schedule.layer_id},
                     {"pe_count", s.schedule.pe_count},
                     {"channels", s.schedule.channel_count()},
                     {"min_acc", s.min_acc},
                     {"optimal", s.optimal},
                     {"worst_group", s.worst_group},
                     {"protected_pes", s.protected_pes},
                     {"pes", pes}};
}

std::string heatmap_csv(const AccuracyTable& table, const Schedule& default_sched, const Schedule& optimal) {
  if (table.group_size() != 2) throw UsageError("heatmap needs a pairwise table");
  const int n = table.channels();
  if (default_sched.channel_count() != n || optimal.channel_count() != n) {
    throw UsageError("schedules do not match the table's channel count");
  }
  std::ostringstream out;
  out << "i,j,correct,default,optimal\n";
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto same = [&](const Schedule& s) {
        return s.assignment[static_cast<std::size_t>(i)] == s.assignment[static_cast<std::size_t>(j)] ? 1 : 0;
      };
      out << i << ',' << j << ',' << table.at(i, j) << ',' << same(default_sched) << ',' << same(optimal) << '\n';
    }
  }
  return out.str();
}

}  // namespace qnnfault
