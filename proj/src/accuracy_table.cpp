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

#include "qnnfault/accuracy_table.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "qnnfault/error.hpp"

namespace qnnfault {

namespace {
constexpr std::uint64_t kMaxEntries = 1ull << 28;
}

std::uint64_t binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) {
    // r * (n - k + i) / i stays exact because r * (n-k+i) is divisible by i.
    const std::uint64_t num = static_cast<std::uint64_t>(n - k + i);
    if (r > std::numeric_limits<std::uint64_t>::max() / num) {
      throw UsageError("C(" + std::to_string(n) + ", " + std::to_string(k) + ") overflows 64 bits");
    }
    r = r * num / static_cast<std::uint64_t>(i);
  }
  return r;
}

std::vector<std::vector<int>> combinations(int n, int k) {
  std::vector<std::vector<int>> out;
  if (k < 0 || k > n) return out;
  out.reserve(binomial(n, k));
  std::vector<int> c(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) c[static_cast<std::size_t>(i)] = i;
  while (true) {
    out.push_back(c);
    int i = k - 1;
    while (i >= 0 && c[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) break;
    ++c[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j) c[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j - 1)] + 1;
  }
  return out;
}

AccuracyTable::AccuracyTable(int channels, int group_size, std::int64_t fill)
    : channels_(channels), group_size_(group_size) {
  if (group_size < 1 || channels < group_size) {
    throw UsageError("accuracy table needs 1 <= group size <= channels, got " +
                     std::to_string(group_size) + " of " + std::to_string(channels));
  }
  const std::uint64_t n = binomial(channels, group_size);
  if (n > kMaxEntries) {
    throw UsageError("accuracy table with C(" + std::to_string(channels) + ", " +
                     std::to_string(group_size) + ") entries is too large");
  }
  binom_.assign(static_cast<std::size_t>(group_size) + 1, {});
  for (int k = 1; k <= group_size; ++k) {
    auto& row = binom_[static_cast<std::size_t>(k)];
    row.resize(static_cast<std::size_t>(channels) + 1);
    for (int m = 0; m <= channels; ++m) row[static_cast<std::size_t>(m)] = binomial(m, k);
  }
  values_.assign(n, fill);
}

std::size_t AccuracyTable::rank(std::span<const int> group) const {
  if (static_cast<int>(group.size()) != group_size_) {
    throw UsageError("group of " + std::to_string(group.size()) + " channels, table expects " +
                     std::to_string(group_size_));
  }
  std::uint64_t r = 0;
  for (std::size_t i = 0; i < group.size(); ++i) {
    const int c = group[i];
    if (c < 0 || c >= channels_ || (i > 0 && c <= group[i - 1])) {
      throw UsageError("group must hold sorted, distinct channels below " + std::to_string(channels_));
    }
    r += binom_[i + 1][static_cast<std::size_t>(c)];
  }
  return static_cast<std::size_t>(r);
}

std::int64_t AccuracyTable::at(int i, int j) const {
  const int g[2] = {std::min(i, j), std::max(i, j)};
  return values_[rank(g)];
}

std::int64_t AccuracyTable::min_entry() const {
  if (values_.empty()) throw UsageError("empty accuracy table");
  return *std::min_element(values_.begin(), values_.end());
}

std::int64_t AccuracyTable::max_entry() const {
  if (values_.empty()) throw UsageError("empty accuracy table");
  return *std::max_element(values_.begin(), values_.end());
}

CountMatrix AccuracyTable::dense() const {
  if (group_size_ != 2) throw UsageError("dense view requires pairs");
  CountMatrix m = CountMatrix::Constant(channels_, channels_, -1);
  for (int i = 0; i < channels_; ++i) {
    for (int j = i + 1; j < channels_; ++j) m(i, j) = m(j, i) = at(i, j);
  }
  return m;
}

AccuracyTable AccuracyTable::from_dense(const CountMatrix& m) {
  if (m.rows() != m.cols()) throw UsageError("pairwise matrix must be square");
  AccuracyTable t(static_cast<int>(m.rows()), 2);
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = i + 1; j < m.cols(); ++j) {
      if (m(i, j) != m(j, i)) {
        throw UsageError("pairwise matrix is not symmetric at (" + std::to_string(i) + ", " +
                         std::to_string(j) + ")");
      }
      const int g[2] = {i, j};
      t.set(g, m(i, j));
    }
  }
  return t;
}

std::string to_dense_csv(const AccuracyTable& table) {
  const CountMatrix m = table.dense();
  std::ostringstream out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      if (i != j) out << m(i, j);
    }
    out << '\n';
  }
  return out.str();
}

AccuracyTable from_dense_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  CountMatrix m = CountMatrix::Constant(n, n, -1);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n) {
      throw LoadError("dense matrix row " + std::to_string(i) + " has " +
                      std::to_string(rows[static_cast<std::size_t>(i)].size()) + " cells, expected " +
                      std::to_string(n));
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      try {
        m(i, j) = std::stoll(rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
      } catch (const std::exception&) {
        throw LoadError("dense matrix cell (" + std::to_string(i) + ", " + std::to_string(j) +
                        ") is not an integer");
      }
    }
  }
  try {
    return AccuracyTable::from_dense(m);
  } catch (const UsageError& e) {
    throw LoadError(e.what());
  }
}

}  // namespace qnnfault
