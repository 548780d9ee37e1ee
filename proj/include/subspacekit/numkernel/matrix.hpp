#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "subspacekit/error.hpp"
#include "subspacekit/numkernel/parallel.hpp"

namespace subspacekit::numkernel {

/// Dense row-major matrix of 64-bit reals. A default-constructed Matrix is the
/// empty placeholder (0 x 0); every sized matrix has at least one row and one
/// column.
class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols) {
    if (rows == 0 || cols == 0)
      fail(ErrorCode::DimensionMismatch, "matrix must have at least one row and one column");
    data_.assign(rows * cols, fill);
  }

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows == 0 || cols == 0)
      fail(ErrorCode::DimensionMismatch, "matrix must have at least one row and one column");
    if (data_.size() != rows * cols)
      fail(ErrorCode::DimensionMismatch, "data length does not equal rows * cols");
  }

  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    if (rows_ == 0 || cols_ == 0) fail(ErrorCode::DimensionMismatch, "empty initializer");
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) fail(ErrorCode::DimensionMismatch, "ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix diagonal(std::span<const double> values) {
    Matrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    fail(ErrorCode::DimensionMismatch, std::string(what) + ": shapes differ");
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

/// a * b. Each output row is produced by one worker with a fixed summation
/// order.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) fail(ErrorCode::DimensionMismatch, "matmul: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  parallel_for(a.rows(), a.cols() * b.cols(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      auto out = c.row(i);
      for (std::size_t k = 0; k < a.cols(); ++k) {
        const double aik = a(i, k);
        if (aik == 0.0) continue;
        const auto brow = b.row(k);
        for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
      }
    }
  });
  return c;
}

/// a * b^T, computed with contiguous dot products.
inline Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) fail(ErrorCode::DimensionMismatch, "matmul_transposed: column counts differ");
  Matrix c(a.rows(), b.rows());
  parallel_for(a.rows(), a.cols() * b.rows(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto arow = a.row(i);
      for (std::size_t j = 0; j < b.rows(); ++j) {
        const auto brow = b.row(j);
        double s = 0.0;
        for (std::size_t k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
        c(i, j) = s;
      }
    }
  });
  return c;
}

/// a * a^T with the upper triangle mirrored from the lower, so the result is
/// exactly symmetric.
inline Matrix gram(const Matrix& a) {
  Matrix g(a.rows(), a.rows());
  parallel_for(a.rows(), a.cols() * a.rows() / 2 + 1, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto arow = a.row(i);
      for (std::size_t j = 0; j <= i; ++j) {
        const auto brow = a.row(j);
        double s = 0.0;
        for (std::size_t k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
        g(i, j) = s;
      }
    }
  });
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = i + 1; j < g.cols(); ++j) g(i, j) = g(j, i);
  return g;
}

inline Matrix operator+(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix c = a;
  auto cv = c.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] += bv[i];
  return c;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "subtract");
  Matrix c = a;
  auto cv = c.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] -= bv[i];
  return c;
}

inline Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (double& v : c.values()) v *= s;
  return c;
}

inline double frobenius_sq(const Matrix& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return s;
}

inline double frobenius(const Matrix& a) { return std::sqrt(frobenius_sq(a)); }

inline double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

inline double trace(const Matrix& a) {
  if (!a.is_square()) fail(ErrorCode::DimensionMismatch, "trace of a non-square matrix");
  double t = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) t += a(i, i);
  return t;
}

inline bool all_finite(const Matrix& a) {
  return std::all_of(a.values().begin(), a.values().end(), [](double v) { return std::isfinite(v); });
}

/// True when |a_ij - a_ji| <= rel_tol * max|a| for every pair.
inline bool is_symmetric(const Matrix& a, double rel_tol) {
  if (!a.is_square()) return false;
  const double scale = max_abs(a);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(a(i, j) - a(j, i)) > rel_tol * scale) return false;
  return true;
}

}  // namespace subspacekit::numkernel
