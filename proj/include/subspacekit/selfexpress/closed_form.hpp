#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "subspacekit/error.hpp"
#include "subspacekit/numkernel/linalg.hpp"
#include "subspacekit/numkernel/matrix.hpp"
#include "subspacekit/numkernel/parallel.hpp"

// Closed-form ridge self-expression.
//
// For a latent matrix X' with one sample per row, the problem
//
//     min_B ||X' - B X'||_F^2 + lambda ||B||_F^2   s.t. diag(B) = 0
//
// decouples into N ridge regressions and has the solution
//
//     P = (X' X'^T + lambda I)^{-1},   B_ij = -P_ij / P_ii (i != j),   B_ii = 0.
//
// `solve_self_expression` is the production path. `rowwise_ridge_oracle`
// solves each row's (N-1)-variable normal equations directly and shares no
// code with it beyond the SPD factorization.

namespace subspacekit::selfexpress {

using numkernel::Matrix;

/// Square matrix whose diagonal is exactly 0.0.
class CoefficientMatrix {
 public:
  CoefficientMatrix() = default;

  /// Takes ownership of `values` and forces the diagonal to 0.0.
  static CoefficientMatrix with_zero_diagonal(Matrix values) {
    if (!values.is_square()) fail(ErrorCode::DimensionMismatch, "coefficient matrix must be square");
    for (std::size_t i = 0; i < values.rows(); ++i) values(i, i) = 0.0;
    return CoefficientMatrix(std::move(values));
  }

  std::size_t n() const noexcept { return values_.rows(); }
  const Matrix& values() const noexcept { return values_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return values_(i, j); }

 private:
  explicit CoefficientMatrix(Matrix values) : values_(std::move(values)) {}
  Matrix values_;
};

/// Symmetric positive definite (X'X'^T + lambda I)^{-1}.
class PrecisionMatrix {
 public:
  PrecisionMatrix() = default;

  /// Validates symmetry (1e-10 relative) and strictly positive diagonal.
  static PrecisionMatrix from_matrix(Matrix values) {
    if (!values.is_square()) fail(ErrorCode::DimensionMismatch, "precision matrix must be square");
    if (!numkernel::is_symmetric(values, 1e-10))
      fail(ErrorCode::DimensionMismatch, "precision matrix must be symmetric");
    for (std::size_t i = 0; i < values.rows(); ++i)
      if (!(values(i, i) > 0.0))
        fail(ErrorCode::ZeroDiagonalPivot, "precision matrix diagonal entry " + std::to_string(i) + " is not positive");
    return PrecisionMatrix(std::move(values));
  }

  std::size_t n() const noexcept { return values_.rows(); }
  const Matrix& values() const noexcept { return values_; }

 private:
  explicit PrecisionMatrix(Matrix values) : values_(std::move(values)) {}
  Matrix values_;
};

namespace detail {
inline void validate(const Matrix& latent, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    fail(ErrorCode::NonPositiveLambda, "lambda must be a positive finite number");
  if (latent.rows() < 2) fail(ErrorCode::DimensionMismatch, "self-expression needs at least two samples");
}
}  // namespace detail

/// P = (latent latent^T + lambda I)^{-1}.
inline PrecisionMatrix compute_p(const Matrix& latent, double lambda) {
  detail::validate(latent, lambda);
  Matrix shifted = numkernel::gram(latent);
  for (std::size_t i = 0; i < shifted.rows(); ++i) shifted(i, i) += lambda;
  return PrecisionMatrix::from_matrix(numkernel::spd_inverse(shifted));
}

/// B_ij = -P_ij / P_ii off the diagonal, 0 on it.
inline CoefficientMatrix compute_b(const PrecisionMatrix& p) {
  const Matrix& pv = p.values();
  const std::size_t n = pv.rows();
  for (std::size_t i = 0; i < n; ++i)
    if (!(pv(i, i) > 0.0)) fail(ErrorCode::ZeroDiagonalPivot, "P_ii <= 0 at row " + std::to_string(i));
  Matrix b(n, n);
  numkernel::parallel_for(n, n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const double pii = pv(i, i);
      for (std::size_t j = 0; j < n; ++j) b(i, j) = (i == j) ? 0.0 : -pv(i, j) / pii;
    }
  });
  return CoefficientMatrix::with_zero_diagonal(std::move(b));
}

inline CoefficientMatrix solve_self_expression(const Matrix& latent, double lambda) {
  return compute_b(compute_p(latent, lambda));
}

/// Row `row` of the zero-diagonal ridge solution, obtained from the
/// (N-1)-variable normal equations (G_{-i,-i} + lambda I) b = G_{-i,i}.
inline std::vector<double> rowwise_ridge_oracle(const Matrix& latent, double lambda, std::size_t row) {
  detail::validate(latent, lambda);
  const std::size_t n = latent.rows();
  if (row >= n) fail(ErrorCode::DimensionMismatch, "row index out of range");
  std::vector<std::size_t> others;
  others.reserve(n - 1);
  for (std::size_t j = 0; j < n; ++j)
    if (j != row) others.push_back(j);

  auto dot = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t k = 0; k < latent.cols(); ++k) s += latent(a, k) * latent(b, k);
    return s;
  };
  Matrix system(n - 1, n - 1);
  Matrix rhs(n - 1, 1);
  for (std::size_t a = 0; a < n - 1; ++a) {
    for (std::size_t b = 0; b <= a; ++b) {
      const double g = dot(others[a], others[b]);
      system(a, b) = g;
      system(b, a) = g;
    }
    system(a, a) += lambda;
    rhs(a, 0) = dot(others[a], row);
  }
  const Matrix solution = numkernel::spd_solve(system, rhs);
  std::vector<double> out(n, 0.0);
  for (std::size_t a = 0; a < n - 1; ++a) out[others[a]] = solution(a, 0);
  return out;
}

/// ||latent - B latent||_F^2.
inline double self_expression_residual(const Matrix& latent, const CoefficientMatrix& b) {
  if (b.n() != latent.rows()) fail(ErrorCode::DimensionMismatch, "coefficient size does not match sample count");
  return numkernel::frobenius_sq(latent - numkernel::matmul(b.values(), latent));
}

/// Full ridge objective ||latent - B latent||_F^2 + lambda ||B||_F^2.
inline double self_expression_objective(const Matrix& latent, const CoefficientMatrix& b, double lambda) {
  return self_expression_residual(latent, b) + lambda * numkernel::frobenius_sq(b.values());
}

}  // namespace subspacekit::selfexpress
