#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "subspacekit/error.hpp"
#include "subspacekit/numkernel/matrix.hpp"
#include "subspacekit/numkernel/random.hpp"

namespace subspacekit::numkernel {

struct KMeansResult {
  std::vector<int> labels;
  Matrix centers;
  double inertia = 0.0;
  // Inertia after each Lloyd assignment step of the winning restart.
  std::vector<double> inertia_history;
  std::size_t winning_restart = 0;
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

// k-means++ seeding: first center uniform, then proportional to D^2.
inline Matrix seed_plus_plus(const Matrix& points, std::size_t k, SplitMix64& rng) {
  const std::size_t n = points.rows();
  Matrix centers(k, points.cols());
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t pick = static_cast<std::size_t>(rng.below(n));
  for (std::size_t c = 0; c < k; ++c) {
    std::copy(points.row(pick).begin(), points.row(pick).end(), centers.row(c).begin());
    if (c + 1 == k) break;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points.row(i), centers.row(c)));
      total += nearest[i];
    }
    if (total <= 0.0) {
      // every point coincides with a center already; fall back to uniform picks
      pick = static_cast<std::size_t>(rng.below(n));
      continue;
    }
    const double target = rng.uniform() * total;
    double acc = 0.0;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += nearest[i];
      if (acc > target && nearest[i] > 0.0) {
        pick = i;
        break;
      }
    }
  }
  return centers;
}

inline double assign(const Matrix& points, const Matrix& centers, std::vector<int>& labels) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (std::size_t c = 0; c < centers.rows(); ++c) {
      const double dist = squared_distance(points.row(i), centers.row(c));
      if (dist < best) {
        best = dist;
        best_c = static_cast<int>(c);
      }
    }
    labels[i] = best_c;
    inertia += best;
  }
  return inertia;
}

// Empty clusters keep their previous center, which keeps inertia monotone.
inline void update_centers(const Matrix& points, const std::vector<int>& labels, Matrix& centers) {
  Matrix sums(centers.rows(), centers.cols());
  std::vector<std::size_t> counts(centers.rows(), 0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    auto s = sums.row(static_cast<std::size_t>(labels[i]));
    const auto p = points.row(i);
    for (std::size_t j = 0; j < p.size(); ++j) s[j] += p[j];
    ++counts[static_cast<std::size_t>(labels[i])];
  }
  for (std::size_t c = 0; c < centers.rows(); ++c) {
    if (counts[c] == 0) continue;
    auto dst = centers.row(c);
    const auto s = sums.row(c);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = s[j] / static_cast<double>(counts[c]);
  }
}

}  // namespace detail

/// Lloyd's k-means with k-means++ seeding; keeps the restart with the lowest
/// within-cluster sum of squares. Fully determined by (points, k, seed,
/// restarts).
inline KMeansResult kmeans_detailed(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t restarts,
                                    std::size_t max_iterations = 300) {
  if (points.empty()) fail(ErrorCode::EmptyInput, "kmeans: no points");
  if (k == 0) fail(ErrorCode::InvalidArgument, "kmeans: k must be positive");
  if (k > points.rows()) fail(ErrorCode::KTooLarge, "kmeans: k exceeds the number of points");
  if (restarts == 0) fail(ErrorCode::InvalidArgument, "kmeans: restarts must be at least 1");

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < restarts; ++r) {
    SplitMix64 rng(derive_seed(seed, r));
    Matrix centers = detail::seed_plus_plus(points, k, rng);
    std::vector<int> labels(points.rows(), -1);
    std::vector<double> history;
    double inertia = detail::assign(points, centers, labels);
    history.push_back(inertia);
    for (std::size_t it = 0; it < max_iterations; ++it) {
      detail::update_centers(points, labels, centers);
      std::vector<int> next(points.rows());
      const double next_inertia = detail::assign(points, centers, next);
      history.push_back(next_inertia);
      const bool stable = next == labels;
      labels = std::move(next);
      inertia = next_inertia;
      if (stable) break;
    }
    if (inertia < best.inertia) {
      best.labels = std::move(labels);
      best.centers = std::move(centers);
      best.inertia = inertia;
      best.inertia_history = std::move(history);
      best.winning_restart = r;
    }
  }
  return best;
}

inline std::vector<int> kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t restarts = 20) {
  return kmeans_detailed(points, k, seed, restarts).labels;
}

}  // namespace subspacekit::numkernel
