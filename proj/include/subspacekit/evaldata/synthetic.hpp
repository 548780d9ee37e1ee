#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "subspacekit/error.hpp"
#include "subspacekit/numkernel/matrix.hpp"
#include "subspacekit/numkernel/random.hpp"

namespace subspacekit::evaldata {

using numkernel::Matrix;

struct SyntheticSpec {
  std::size_t k = 3;
  std::size_t subspace_dim = 3;
  std::size_t points_per_subspace = 40;
  std::size_t ambient_dim = 30;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  bool orthogonal = true;  // false: each basis drawn independently
};

struct SyntheticData {
  Matrix data;              // one sample per row, grouped by subspace
  std::vector<int> labels;  // subspace index per row
  std::vector<Matrix> bases;  // ambient_dim x subspace_dim, orthonormal columns
};

namespace detail {

// Orthonormalizes the columns of `m` in place (modified Gram-Schmidt, two
// passes). Throws InfeasibleSpec on a numerically dependent column.
inline void orthonormalize_columns(Matrix& m) {
  for (std::size_t c = 0; c < m.cols(); ++c) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t p = 0; p < c; ++p) {
        double dot = 0.0;
        for (std::size_t r = 0; r < m.rows(); ++r) dot += m(r, p) * m(r, c);
        for (std::size_t r = 0; r < m.rows(); ++r) m(r, c) -= dot * m(r, p);
      }
    double norm = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) norm += m(r, c) * m(r, c);
    norm = std::sqrt(norm);
    if (!(norm > 1e-10)) fail(ErrorCode::InfeasibleSpec, "degenerate random basis");
    for (std::size_t r = 0; r < m.rows(); ++r) m(r, c) /= norm;
  }
}

inline Matrix gaussian(std::size_t rows, std::size_t cols, numkernel::SplitMix64& rng) {
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = rng.normal();
  return m;
}

}  // namespace detail

inline void validate(const SyntheticSpec& s) {
  if (s.k == 0 || s.subspace_dim == 0 || s.points_per_subspace == 0 || s.ambient_dim == 0)
    fail(ErrorCode::InfeasibleSpec, "all counts must be positive");
  if (s.subspace_dim >= s.ambient_dim) fail(ErrorCode::InfeasibleSpec, "subspace dimension must be below ambient");
  if (s.k * s.subspace_dim > s.ambient_dim)
    fail(ErrorCode::InfeasibleSpec, "k * subspace dimension exceeds ambient dimension");
  if (!(s.noise_sigma >= 0.0) || !std::isfinite(s.noise_sigma))
    fail(ErrorCode::InfeasibleSpec, "noise sigma must be finite and non-negative");
}

/// Union-of-subspaces samples. Coefficients are Gaussian scaled to unit norm;
/// i.i.d. N(0, sigma^2) noise is added to every coordinate.
inline SyntheticData generate_subspaces(const SyntheticSpec& spec) {
  validate(spec);
  const std::size_t d = spec.ambient_dim, r = spec.subspace_dim;
  numkernel::SplitMix64 basis_rng(numkernel::derive_seed(spec.seed, 0));
  numkernel::SplitMix64 point_rng(numkernel::derive_seed(spec.seed, 1));
  numkernel::SplitMix64 noise_rng(numkernel::derive_seed(spec.seed, 2));

  SyntheticData out;
  if (spec.orthogonal) {
    Matrix all = detail::gaussian(d, spec.k * r, basis_rng);
    detail::orthonormalize_columns(all);
    for (std::size_t s = 0; s < spec.k; ++s) {
      Matrix b(d, r);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < r; ++j) b(i, j) = all(i, s * r + j);
      out.bases.push_back(std::move(b));
    }
  } else {
    for (std::size_t s = 0; s < spec.k; ++s) {
      Matrix b = detail::gaussian(d, r, basis_rng);
      detail::orthonormalize_columns(b);
      out.bases.push_back(std::move(b));
    }
  }

  const std::size_t n = spec.k * spec.points_per_subspace;
  out.data = Matrix(n, d);
  out.labels.reserve(n);
  std::vector<double> coef(r);
  for (std::size_t s = 0; s < spec.k; ++s) {
    for (std::size_t p = 0; p < spec.points_per_subspace; ++p) {
      const std::size_t row = s * spec.points_per_subspace + p;
      double norm = 0.0;
      do {
        norm = 0.0;
        for (auto& c : coef) {
          c = point_rng.normal();
          norm += c * c;
        }
      } while (norm == 0.0);
      norm = std::sqrt(norm);
      for (std::size_t i = 0; i < d; ++i) {
        double v = 0.0;
        for (std::size_t j = 0; j < r; ++j) v += out.bases[s](i, j) * coef[j] / norm;
        out.data(row, i) = v;
      }
      out.labels.push_back(static_cast<int>(s));
    }
  }
  if (spec.noise_sigma > 0.0)
    for (auto& v : out.data.values()) v += spec.noise_sigma * noise_rng.normal();
  return out;
}

}  // namespace subspacekit::evaldata
