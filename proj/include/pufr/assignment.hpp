/*
 * Copyright 2026 The pufr Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Dense linear assignment: Hungarian method (shortest augmenting path with
// potentials, O(n^3)) and Murty's ranking of assignments by total benefit.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <vector>

#include "pufr/core.hpp"

namespace pufr {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    for (const auto& row : init) {
      if (row.size() != cols_) throw Error("ragged matrix initializer");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// row -> column.
using Assignment = std::vector<int>;

namespace internal {

inline constexpr double kForbidden = std::numeric_limits<double>::infinity();

// Minimum-cost perfect matching of a square matrix whose entries may be
// +infinity (forbidden). Returns nullopt when no finite matching exists.
inline std::optional<Assignment> min_cost_assignment(const Matrix& cost) {
  const std::size_t n = cost.rows();
  if (n == 0) return Assignment{};
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is a virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<double> min_slack(n + 1);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(min_slack.begin(), min_slack.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < min_slack[j]) {
          min_slack[j] = cur;
          way[j] = j0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          j1 = j;
        }
      }
      if (j1 == 0 || delta == inf) return std::nullopt;
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Assignment result(n, -1);
  for (std::size_t j = 1; j <= n; ++j) {
    result[match[j] - 1] = static_cast<int>(j - 1);
  }
  return result;
}

inline void check_benefit(const Matrix& benefit) {
  if (benefit.rows() != benefit.cols()) {
    throw Error("assignment matrix must be square");
  }
  for (std::size_t r = 0; r < benefit.rows(); ++r) {
    for (std::size_t c = 0; c < benefit.cols(); ++c) {
      if (!std::isfinite(benefit(r, c))) {
        throw Error("assignment matrix has a non-finite entry");
      }
    }
  }
}

}  // namespace internal

inline double assignment_value(const Matrix& benefit, const Assignment& a) {
  double total = 0.0;
  for (std::size_t r = 0; r < a.size(); ++r) total += benefit(r, a[r]);
  return total;
}

// Permutation maximizing the total benefit.
inline Assignment hungarian_assign(const Matrix& benefit) {
  internal::check_benefit(benefit);
  const std::size_t n = benefit.rows();
  Matrix cost(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) cost(r, c) = -benefit(r, c);
  }
  return *internal::min_cost_assignment(cost);
}

// Yields assignments of a square benefit matrix in non-increasing order of
// total benefit (Murty's partitioning). Each call to next() costs up to n
// Hungarian solves.
class AssignmentRanker {
 public:
  explicit AssignmentRanker(Matrix benefit) : benefit_(std::move(benefit)) {
    internal::check_benefit(benefit_);
    const std::size_t n = benefit_.rows();
    Node root;
    root.forced.assign(n, -1);
    root.forbidden.assign(n * n, 0);
    if (solve(root)) push(std::move(root));
  }

  // nullopt once every assignment has been produced.
  std::optional<Assignment> next() {
    if (heap_.empty()) return std::nullopt;
    Node node = heap_.top().node;
    heap_.pop();
    partition(node);
    return node.solution;
  }

 private:
  struct Node {
    std::vector<int> forced;      // row -> column or -1
    std::vector<char> forbidden;  // row-major n x n mask
    Assignment solution;
    double value = 0.0;
  };
  struct Entry {
    Node node;
    std::uint64_t seq;
    bool operator<(const Entry& o) const {
      if (node.value != o.node.value) return node.value < o.node.value;
      return seq > o.seq;
    }
  };

  bool solve(Node& node) const {
    const std::size_t n = benefit_.rows();
    Matrix cost(n, n);
    std::vector<char> column_taken(n, 0);
    for (std::size_t r = 0; r < n; ++r) {
      if (node.forced[r] >= 0) column_taken[node.forced[r]] = 1;
    }
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        bool allowed;
        if (node.forced[r] >= 0) {
          allowed = node.forced[r] == static_cast<int>(c);
        } else {
          allowed = !column_taken[c] && !node.forbidden[r * n + c];
        }
        cost(r, c) = allowed ? -benefit_(r, c) : internal::kForbidden;
      }
    }
    auto sol = internal::min_cost_assignment(cost);
    if (!sol) return false;
    node.solution = std::move(*sol);
    node.value = assignment_value(benefit_, node.solution);
    return true;
  }

  void partition(const Node& parent) {
    const std::size_t n = benefit_.rows();
    std::vector<std::size_t> free_rows;
    for (std::size_t r = 0; r < n; ++r) {
      if (parent.forced[r] < 0) free_rows.push_back(r);
    }
    Node base = parent;
    // The last free row is determined once the others are forced.
    for (std::size_t t = 0; t + 1 < free_rows.size(); ++t) {
      const std::size_t r = free_rows[t];
      Node child = base;
      child.forbidden[r * n + parent.solution[r]] = 1;
      if (solve(child)) push(std::move(child));
      base.forced[r] = parent.solution[r];
    }
  }

  void push(Node node) { heap_.push(Entry{std::move(node), seq_++}); }

  Matrix benefit_;
  std::priority_queue<Entry> heap_;
  std::uint64_t seq_ = 0;
};

}  // namespace pufr
