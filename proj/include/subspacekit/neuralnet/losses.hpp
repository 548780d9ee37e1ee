#pragma once

#include <cmath>
#include <span>

#include "subspacekit/error.hpp"
#include "subspacekit/numkernel/matrix.hpp"
#include "subspacekit/selfexpress/closed_form.hpp"

namespace subspacekit::neuralnet {

using numkernel::Matrix;

/// ||x - x_recon||_F^2.
inline double reconstruction_loss(const Matrix& x, const Matrix& x_recon) {
  if (x.rows() != x_recon.rows() || x.cols() != x_recon.cols())
    fail(ErrorCode::ShapeMismatch, "reconstruction_loss: shapes differ");
  double s = 0.0;
  const auto a = x.values();
  const auto b = x_recon.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// Sum of squared differences over flat value ranges, accumulated in double.
template <class T>
double squared_distance(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) fail(ErrorCode::ShapeMismatch, "squared_distance: sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

/// How the coefficient penalty lambda1 * ||Theta||_2 is evaluated.
enum class CoefficientNorm { SquaredFrobenius, Frobenius };

/// Joint objective of the learnable self-expressive model:
///   ||x - x_recon||^2 + lambda1 * ||theta||^2 + (lambda2 / 2) ||z - z_se||^2
/// where z_se = theta z. With CoefficientNorm::Frobenius the middle term is
/// lambda1 * ||theta|| instead.
inline double dsc_loss(const Matrix& x, const Matrix& x_recon, const Matrix& z, const Matrix& z_se,
                       const selfexpress::CoefficientMatrix& theta_sel, double lambda1, double lambda2,
                       CoefficientNorm norm = CoefficientNorm::SquaredFrobenius) {
  if (lambda1 < 0 || lambda2 < 0) fail(ErrorCode::InvalidArgument, "dsc_loss: weights must be non-negative");
  if (z.rows() != z_se.rows() || z.cols() != z_se.cols())
    fail(ErrorCode::ShapeMismatch, "dsc_loss: latent shapes differ");
  if (theta_sel.n() != z.rows()) fail(ErrorCode::ShapeMismatch, "dsc_loss: coefficient size differs from sample count");
  const double coef_sq = numkernel::frobenius_sq(theta_sel.values());
  const double penalty = norm == CoefficientNorm::SquaredFrobenius ? coef_sq : std::sqrt(coef_sq);
  return reconstruction_loss(x, x_recon) + lambda1 * penalty + 0.5 * lambda2 * reconstruction_loss(z, z_se);
}

}  // namespace subspacekit::neuralnet
