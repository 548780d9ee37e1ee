#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <vector>

#include "subspacekit/error.hpp"

namespace subspacekit::evaldata {

namespace detail {

// Minimum-cost perfect assignment on a square cost matrix (Hungarian method
// with row/column potentials, O(m^3)). Returns the column matched to each row.
inline std::vector<std::size_t> solve_assignment(const std::vector<std::vector<double>>& cost) {
  const std::size_t m = cost.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; index 0 is a virtual column
  std::vector<double> u(m + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> match(m + 1, 0), way(m + 1, 0);
  for (std::size_t row = 1; row <= m; ++row) {
    match[0] = row;
    std::size_t col0 = 0;
    std::vector<double> min_to(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[col0] = true;
      const std::size_t r = match[col0];
      double delta = inf;
      std::size_t col1 = 0;
      for (std::size_t c = 1; c <= m; ++c) {
        if (used[c]) continue;
        const double reduced = cost[r - 1][c - 1] - u[r] - v[c];
        if (reduced < min_to[c]) {
          min_to[c] = reduced;
          way[c] = col0;
        }
        if (min_to[c] < delta) {
          delta = min_to[c];
          col1 = c;
        }
      }
      for (std::size_t c = 0; c <= m; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          min_to[c] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<std::size_t> row_to_col(m);
  for (std::size_t c = 1; c <= m; ++c) row_to_col[match[c] - 1] = c - 1;
  return row_to_col;
}

inline std::vector<std::size_t> compact_labels(const std::vector<int>& labels, std::size_t& count) {
  std::map<int, std::size_t> ids;
  for (int l : labels) {
    if (l < 0) fail(ErrorCode::InvalidArgument, "labels must be non-negative");
    ids.emplace(l, 0);
  }
  std::size_t next = 0;
  for (auto& [label, id] : ids) id = next++;
  count = next;
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (int l : labels) out.push_back(ids.at(l));
  return out;
}

}  // namespace detail

/// Fraction of samples misassigned under the best one-to-one mapping between
/// predicted and true labels. Label values need not be contiguous.
inline double clustering_error(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) fail(ErrorCode::LengthMismatch, "label vectors differ in length");
  if (pred.empty()) fail(ErrorCode::EmptyInput, "empty label vectors");
  std::size_t kp = 0, kt = 0;
  const auto p = detail::compact_labels(pred, kp);
  const auto t = detail::compact_labels(truth, kt);
  const std::size_t m = std::max(kp, kt);
  std::vector<std::vector<double>> confusion(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < p.size(); ++i) confusion[p[i]][t[i]] += 1.0;
  std::vector<std::vector<double>> cost = confusion;
  for (auto& row : cost)
    for (auto& c : row) c = -c;
  const auto assignment = detail::solve_assignment(cost);
  double matched = 0.0;
  for (std::size_t r = 0; r < m; ++r) matched += confusion[r][assignment[r]];
  return 1.0 - matched / static_cast<double>(pred.size());
}

}  // namespace subspacekit::evaldata
