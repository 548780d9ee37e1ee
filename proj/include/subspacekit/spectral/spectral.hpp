#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "subspacekit/error.hpp"
#include "subspacekit/numkernel/kmeans.hpp"
#include "subspacekit/numkernel/linalg.hpp"
#include "subspacekit/numkernel/matrix.hpp"
#include "subspacekit/selfexpress/closed_form.hpp"

namespace subspacekit::spectral {

using numkernel::Matrix;
using selfexpress::CoefficientMatrix;

/// Degree offset applied when some vertex has no edges.
inline constexpr double kIsolatedDegreeOffset = 1e-12;

/// Symmetric, non-negative, zero-diagonal similarity matrix.
class AffinityMatrix {
 public:
  AffinityMatrix() = default;

  /// Validates exact symmetry, non-negativity and a zero diagonal.
  static AffinityMatrix from_matrix(Matrix values) {
    if (!values.is_square()) fail(ErrorCode::DimensionMismatch, "affinity matrix must be square");
    const std::size_t n = values.rows();
    for (std::size_t i = 0; i < n; ++i) {
      if (values(i, i) != 0.0) fail(ErrorCode::InvalidArgument, "affinity diagonal must be zero");
      for (std::size_t j = 0; j < n; ++j) {
        if (!(values(i, j) >= 0.0)) fail(ErrorCode::InvalidArgument, "affinity entries must be non-negative");
        if (values(i, j) != values(j, i)) fail(ErrorCode::InvalidArgument, "affinity matrix must be symmetric");
      }
    }
    return AffinityMatrix(std::move(values));
  }

  std::size_t n() const noexcept { return values_.rows(); }
  const Matrix& values() const noexcept { return values_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return values_(i, j); }

 private:
  explicit AffinityMatrix(Matrix values) : values_(std::move(values)) {}
  Matrix values_;
};

struct ClusterConfig {
  std::size_t k = 2;
  double threshold_ratio = 1.0;  // rho in (0, 1]
  std::uint64_t seed = 0;
  std::size_t kmeans_restarts = 20;
};

struct ClusterResult {
  std::vector<int> labels;
  std::vector<std::string> warnings;
  std::vector<double> eigenvalues;  // the k smallest of L_sym, ascending
};

/// Row-wise magnitude thresholding, |B~| + |B~^T| symmetrization, zero diagonal.
inline AffinityMatrix build_affinity(const CoefficientMatrix& b, double threshold_ratio) {
  if (!(threshold_ratio > 0.0 && threshold_ratio <= 1.0))
    fail(ErrorCode::InvalidArgument, "threshold ratio must lie in (0, 1]");
  const std::size_t n = b.n();
  if (n == 0) fail(ErrorCode::EmptyInput, "empty coefficient matrix");
  Matrix kept(n, n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += std::abs(b(i, j));
    if (total == 0.0) fail(ErrorCode::AllZeroRow, "row " + std::to_string(i) + " of the coefficient matrix is zero");
    if (threshold_ratio == 1.0) {
      for (std::size_t j = 0; j < n; ++j) kept(i, j) = std::abs(b(i, j));
      continue;
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    // ties broken by column index so the kept set is deterministic
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return std::abs(b(i, x)) > std::abs(b(i, y)); });
    const double target = threshold_ratio * total;
    double cumulative = 0.0;
    for (std::size_t j : order) {
      if (cumulative >= target) break;
      kept(i, j) = std::abs(b(i, j));
      cumulative += kept(i, j);
    }
  }
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (kept(i, j) + kept(j, i));
  return AffinityMatrix::from_matrix(std::move(a));
}

/// Normalized spectral clustering on L_sym with a row-normalized embedding.
inline ClusterResult spectral_cluster_detailed(const AffinityMatrix& a, const ClusterConfig& config) {
  const std::size_t n = a.n();
  if (n == 0) fail(ErrorCode::EmptyInput, "empty affinity matrix");
  if (config.k < 2) fail(ErrorCode::InvalidArgument, "k must be at least 2");
  if (config.k > n) fail(ErrorCode::KTooLarge, "k exceeds the number of samples");
  ClusterResult result;

  std::vector<double> degree(n, 0.0);
  bool isolated = false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) degree[i] += a(i, j);
    isolated = isolated || degree[i] == 0.0;
  }
  if (isolated) {
    std::size_t count = 0;
    for (auto& d : degree) {
      count += d == 0.0;
      d += kIsolatedDegreeOffset;
    }
    result.warnings.push_back(std::to_string(count) + " isolated vertex(es); degrees offset by 1e-12");
  }
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);

  Matrix laplacian(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double v = (i == j ? 1.0 : 0.0) - inv_sqrt[i] * a(i, j) * inv_sqrt[j];
      laplacian(i, j) = laplacian(j, i) = v;
    }

  const auto eig = numkernel::symmetric_eig(laplacian);
  const std::size_t k = config.k;
  Matrix embedding(n, k);
  for (std::size_t c = 0; c < k; ++c) {
    result.eigenvalues.push_back(eig.eigenvalues[c]);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(eig.eigenvectors(i, c)) > std::abs(eig.eigenvectors(arg, c))) arg = i;
    const double sign = eig.eigenvectors(arg, c) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) embedding(i, c) = sign * eig.eigenvectors(i, c);
  }
  for (std::size_t i = 0; i < n; ++i) {
    double norm = 0.0;
    for (std::size_t c = 0; c < k; ++c) norm += embedding(i, c) * embedding(i, c);
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (std::size_t c = 0; c < k; ++c) embedding(i, c) /= norm;
  }

  result.labels = numkernel::kmeans(embedding, k, config.seed, config.kmeans_restarts);
  std::vector<std::size_t> sizes(k, 0);
  for (int l : result.labels) ++sizes[static_cast<std::size_t>(l)];
  const auto empty = static_cast<std::size_t>(std::count(sizes.begin(), sizes.end(), std::size_t{0}));
  if (empty > 0) result.warnings.push_back(std::to_string(empty) + " empty cluster(s)");
  return result;
}

inline std::vector<int> spectral_cluster(const AffinityMatrix& a, const ClusterConfig& config) {
  return spectral_cluster_detailed(a, config).labels;
}

inline ClusterResult cluster_from_coefficients_detailed(const CoefficientMatrix& b, const ClusterConfig& config) {
  return spectral_cluster_detailed(build_affinity(b, config.threshold_ratio), config);
}

inline std::vector<int> cluster_from_coefficients(const CoefficientMatrix& b, const ClusterConfig& config) {
  return cluster_from_coefficients_detailed(b, config).labels;
}

}  // namespace subspacekit::spectral
