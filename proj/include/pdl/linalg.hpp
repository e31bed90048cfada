#ifndef PDL_LINALG_HPP_
#define PDL_LINALG_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pdl/errors.hpp"

namespace pdl {

using Vector = std::vector<double>;
using ConstSpan = std::span<const double>;

/// Pairwise (cascade) summation. The reduction tree depends only on the
/// length, so results do not depend on how the terms were produced.
inline double pairwise_sum(ConstSpan v) {
  constexpr std::size_t kBlock = 8;
  if (v.size() <= kBlock) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline double mean(ConstSpan v) {
  if (v.empty()) throw InvalidInput("mean of an empty sequence");
  return pairwise_sum(v) / static_cast<double>(v.size());
}

inline void require_same_size(ConstSpan a, ConstSpan b, const char* what) {
  if (a.size() != b.size()) {
    throw InvalidInput(std::string(what) + ": dimension mismatch (" + std::to_string(a.size()) +
                       " vs " + std::to_string(b.size()) + ")");
  }
}

inline double dot(ConstSpan a, ConstSpan b) {
  require_same_size(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2_sq(ConstSpan a) { return dot(a, a); }
inline double norm2(ConstSpan a) { return std::sqrt(norm2_sq(a)); }

inline double norm_inf(ConstSpan a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

inline Vector sub(ConstSpan a, ConstSpan b) {
  require_same_size(a, b, "sub");
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline Vector add(ConstSpan a, ConstSpan b) {
  require_same_size(a, b, "add");
  Vector r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline Vector scaled(ConstSpan a, double s) {
  Vector r(a.begin(), a.end());
  for (double& x : r) x *= s;
  return r;
}

// y += s * x
inline void axpy(double s, ConstSpan x, std::span<double> y) {
  if (x.size() != y.size()) throw InvalidInput("axpy: dimension mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

inline bool all_finite(ConstSpan a) {
  for (double x : a) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix diagonal(ConstSpan d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  ConstSpan row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  ConstSpan data() const noexcept { return data_; }

  Vector multiply(ConstSpan x) const {
    if (x.size() != cols_) throw InvalidInput("matrix-vector product: dimension mismatch");
    Vector y(rows_);
    for (std::size_t r = 0; r < rows_; ++r) y[r] = dot(row(r), x);
    return y;
  }

  /// Computes this^T * x.
  Vector multiply_transposed(ConstSpan x) const {
    if (x.size() != rows_) throw InvalidInput("transposed product: dimension mismatch");
    Vector y(cols_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) axpy(x[r], row(r), y);
    return y;
  }

  double frobenius_norm() const { return norm2(data_); }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double quadratic_form(const Matrix& a, ConstSpan x) { return dot(x, a.multiply(x)); }

}  // namespace pdl

#endif  // PDL_LINALG_HPP_
