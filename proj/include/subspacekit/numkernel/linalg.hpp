#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "subspacekit/error.hpp"
#include "subspacekit/numkernel/matrix.hpp"
#include "subspacekit/numkernel/parallel.hpp"

namespace subspacekit::numkernel {

inline constexpr double kSymmetryTolerance = 1e-12;

namespace detail {
inline void require_symmetric(const Matrix& a, const char* what) {
  if (!a.is_square()) fail(ErrorCode::DimensionMismatch, std::string(what) + ": matrix is not square");
  if (!is_symmetric(a, kSymmetryTolerance))
    fail(ErrorCode::DimensionMismatch, std::string(what) + ": matrix is not symmetric");
}
}  // namespace detail

/// Lower-triangular Cholesky factor L with a = L L^T. Only the lower triangle
/// of `a` is read. Throws NotPositiveDefinite on a non-positive pivot.
inline Matrix cholesky(const Matrix& a) {
  if (!a.is_square()) fail(ErrorCode::DimensionMismatch, "cholesky: matrix is not square");
  const std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto lj = l.row(j);
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= lj[k] * lj[k];
    if (!(diag > 0.0) || !std::isfinite(diag))
      fail(ErrorCode::NotPositiveDefinite, "non-positive pivot at index " + std::to_string(j));
    const double ljj = std::sqrt(diag);
    l(j, j) = ljj;
    const std::size_t below = n - j - 1;
    parallel_for(below, j + 1, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t r = lo; r < hi; ++r) {
        const std::size_t i = j + 1 + r;
        const auto li = l.row(i);
        double s = a(i, j);
        for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
        li[j] = s / ljj;
      }
    });
  }
  return l;
}

/// Solves a x = b for symmetric positive definite a.
inline Matrix spd_solve(const Matrix& a, const Matrix& b) {
  detail::require_symmetric(a, "spd_solve");
  if (a.rows() != b.rows()) fail(ErrorCode::DimensionMismatch, "spd_solve: row counts differ");
  const Matrix l = cholesky(a);
  const std::size_t n = a.rows();
  Matrix x = b;
  // forward substitution L y = b, then back substitution L^T x = y
  for (std::size_t c = 0; c < x.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = x(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
      x(i, c) = s / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double s = x(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x(k, c);
      x(ii, c) = s / l(ii, ii);
    }
  }
  return x;
}

/// Inverse of a symmetric positive definite matrix through its Cholesky
/// factor. The result is exactly symmetric.
inline Matrix spd_inverse(const Matrix& a) {
  detail::require_symmetric(a, "spd_inverse");
  const Matrix l = cholesky(a);
  const std::size_t n = a.rows();
  // u holds L^{-1} transposed: row j of u is column j of L^{-1}, nonzero from j on.
  Matrix u(n, n);
  parallel_for(n, n * n / 2 + 1, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t j = lo; j < hi; ++j) {
      auto uj = u.row(j);
      uj[j] = 1.0 / l(j, j);
      for (std::size_t i = j + 1; i < n; ++i) {
        const auto li = l.row(i);
        double s = 0.0;
        for (std::size_t k = j; k < i; ++k) s += li[k] * uj[k];
        uj[i] = -s / li[i];
      }
    }
  });
  Matrix p(n, n);
  parallel_for(n, n * n / 2 + 1, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto ui = u.row(i);
      for (std::size_t j = 0; j <= i; ++j) {
        const auto uj = u.row(j);
        double s = 0.0;
        for (std::size_t k = i; k < n; ++k) s += ui[k] * uj[k];
        p(i, j) = s;
      }
    }
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) p(i, j) = p(j, i);
  return p;
}

struct EigenDecomposition {
  std::vector<double> eigenvalues;  // ascending
  Matrix eigenvectors;              // column j pairs with eigenvalues[j]
};

/// Symmetric eigendecomposition: Householder tridiagonalization followed by
/// implicit QL iteration (the EISPACK tred2/tql2 pair).
inline EigenDecomposition symmetric_eig(const Matrix& a, int max_sweeps_per_value = 60) {
  detail::require_symmetric(a, "symmetric_eig");
  const std::size_t n = a.rows();
  Matrix v = a;
  std::vector<double> d(n), e(n);

  // Householder reduction to tridiagonal form.
  for (std::size_t j = 0; j < n; ++j) d[j] = v(n - 1, j);
  for (std::size_t i = n - 1; i > 0; --i) {
    double scale = 0.0;
    double h = 0.0;
    for (std::size_t k = 0; k < i; ++k) scale += std::abs(d[k]);
    if (scale == 0.0) {
      e[i] = d[i - 1];
      for (std::size_t j = 0; j < i; ++j) {
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
        v(j, i) = 0.0;
      }
    } else {
      for (std::size_t k = 0; k < i; ++k) {
        d[k] /= scale;
        h += d[k] * d[k];
      }
      double f = d[i - 1];
      double g = std::sqrt(h);
      if (f > 0) g = -g;
      e[i] = scale * g;
      h -= f * g;
      d[i - 1] = f - g;
      for (std::size_t j = 0; j < i; ++j) e[j] = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        v(j, i) = f;
        g = e[j] + v(j, j) * f;
        for (std::size_t k = j + 1; k <= i - 1; ++k) {
          g += v(k, j) * d[k];
          e[k] += v(k, j) * f;
        }
        e[j] = g;
      }
      f = 0.0;
      for (std::size_t j = 0; j < i; ++j) {
        e[j] /= h;
        f += e[j] * d[j];
      }
      const double hh = f / (h + h);
      for (std::size_t j = 0; j < i; ++j) e[j] -= hh * d[j];
      for (std::size_t j = 0; j < i; ++j) {
        f = d[j];
        g = e[j];
        for (std::size_t k = j; k <= i - 1; ++k) v(k, j) -= (f * e[k] + g * d[k]);
        d[j] = v(i - 1, j);
        v(i, j) = 0.0;
      }
    }
    d[i] = h;
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    v(n - 1, i) = v(i, i);
    v(i, i) = 1.0;
    const double h = d[i + 1];
    if (h != 0.0) {
      for (std::size_t k = 0; k <= i; ++k) d[k] = v(k, i + 1) / h;
      for (std::size_t j = 0; j <= i; ++j) {
        double g = 0.0;
        for (std::size_t k = 0; k <= i; ++k) g += v(k, i + 1) * v(k, j);
        for (std::size_t k = 0; k <= i; ++k) v(k, j) -= g * d[k];
      }
    }
    for (std::size_t k = 0; k <= i; ++k) v(k, i + 1) = 0.0;
  }
  for (std::size_t j = 0; j < n; ++j) {
    d[j] = v(n - 1, j);
    v(n - 1, j) = 0.0;
  }
  v(n - 1, n - 1) = 1.0;
  e[0] = 0.0;

  // QL iteration works on rows of w = v^T so that each plane rotation touches
  // two contiguous rows.
  Matrix w = transpose(v);
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  double f = 0.0;
  double tst1 = 0.0;
  const double eps = std::ldexp(1.0, -52);
  for (std::size_t l = 0; l < n; ++l) {
    tst1 = std::max(tst1, std::abs(d[l]) + std::abs(e[l]));
    std::size_t m = l;
    while (m < n) {
      if (std::abs(e[m]) <= eps * tst1) break;
      ++m;
    }
    if (m > l) {
      int iter = 0;
      do {
        if (++iter > max_sweeps_per_value)
          fail(ErrorCode::ConvergenceFailure, "QL iteration did not converge for eigenvalue " + std::to_string(l));
        double g = d[l];
        double p = (d[l + 1] - g) / (2.0 * e[l]);
        double r = std::hypot(p, 1.0);
        if (p < 0) r = -r;
        d[l] = e[l] / (p + r);
        d[l + 1] = e[l] * (p + r);
        const double dl1 = d[l + 1];
        double h = g - d[l];
        for (std::size_t i = l + 2; i < n; ++i) d[i] -= h;
        f += h;

        p = d[m];
        double c = 1.0, c2 = 1.0, c3 = 1.0;
        const double el1 = e[l + 1];
        double s = 0.0, s2 = 0.0;
        for (std::size_t ii = m; ii-- > l;) {
          c3 = c2;
          c2 = c;
          s2 = s;
          g = c * e[ii];
          h = c * p;
          r = std::hypot(p, e[ii]);
          e[ii + 1] = s * r;
          s = e[ii] / r;
          c = p / r;
          p = c * d[ii] - s * g;
          d[ii + 1] = h + s * (c * g + s * d[ii]);
          auto wi = w.row(ii);
          auto wi1 = w.row(ii + 1);
          for (std::size_t k = 0; k < n; ++k) {
            const double t = wi1[k];
            wi1[k] = s * wi[k] + c * t;
            wi[k] = c * wi[k] - s * t;
          }
        }
        p = -s * s2 * c3 * el1 * e[l] / dl1;
        e[l] = s * p;
        d[l] = c * p;
      } while (std::abs(e[l]) > eps * tst1);
    }
    d[l] += f;
    e[l] = 0.0;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return d[x] < d[y]; });
  EigenDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.eigenvalues[j] = d[order[j]];
    const auto src = w.row(order[j]);
    for (std::size_t k = 0; k < n; ++k) out.eigenvectors(k, j) = src[k];
  }
  return out;
}

}  // namespace subspacekit::numkernel
