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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace qnnfault {

// n choose k; throws UsageError on overflow of 64 bits.
std::uint64_t binomial(int n, int k);

// All k-subsets of {0..n-1}, each sorted, in lexicographic order.
std::vector<std::vector<int>> combinations(int n, int k);

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Correct-classification count for every group of `group_size` channels of
/// one layer sharing a faulty PE. Entries are keyed by the sorted channel
/// tuple (stored densely by combinatorial rank), so E is symmetric by
/// construction. group_size 2 is the pairwise matrix E[i][j].
class AccuracyTable {
 public:
  AccuracyTable() = default;
  // All entries start at `fill`.
  AccuracyTable(int channels, int group_size, std::int64_t fill = 0);

  int channels() const { return channels_; }
  int group_size() const { return group_size_; }
  std::size_t entry_count() const { return values_.size(); }

  int layer_id = 0;
  // Injected level; empty once levels have been combined.
  std::optional<std::int32_t> level;

  // Rank of a sorted, duplicate-free group; throws UsageError otherwise.
  std::size_t rank(std::span<const int> group) const;
  std::int64_t at(std::span<const int> group) const { return values_[rank(group)]; }
  std::int64_t at(int i, int j) const;  // group_size 2, any order
  void set(std::span<const int> group, std::int64_t value) { values_[rank(group)] = value; }

  std::span<const std::int64_t> values() const { return values_; }
  std::span<std::int64_t> values() { return values_; }

  std::int64_t min_entry() const;
  std::int64_t max_entry() const;

  // Symmetric N x N matrix for group_size 2; the diagonal holds -1.
  CountMatrix dense() const;
  static AccuracyTable from_dense(const CountMatrix& m);

  friend bool operator==(const AccuracyTable&, const AccuracyTable&) = default;

 private:
  int channels_ = 0;
  int group_size_ = 0;
  std::vector<std::vector<std::uint64_t>> binom_;  // binom_[k][n] = C(n, k) for k <= group_size
  std::vector<std::int64_t> values_;
};

// Dense CSV: N rows of N comma-separated counts, empty on the diagonal.
std::string to_dense_csv(const AccuracyTable& table);
AccuracyTable from_dense_csv(const std::string& text);

}  // namespace qnnfault
