#ifndef PDL_SIMPLEX_HPP_
#define PDL_SIMPLEX_HPP_

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "pdl/errors.hpp"
#include "pdl/linalg.hpp"

namespace pdl {

/// Absolute tolerance on the sum of a probability vector.
inline constexpr double kSimplexSumTol = 1e-9;

/// Throws InvalidInput unless `p` is a probability vector.
inline void check_simplex(ConstSpan p, double tol = kSimplexSumTol) {
  if (p.empty()) throw InvalidInput("probability vector must be nonempty");
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0)) {
      throw InvalidInput("probability entry " + std::to_string(i) + " is negative or NaN: " +
                         std::to_string(p[i]));
    }
    total += p[i];
  }
  if (std::abs(total - 1.0) > tol) {
    throw InvalidInput("probability vector sums to " + std::to_string(total) + ", not 1");
  }
}

inline bool is_simplex(ConstSpan p, double tol = kSimplexSumTol) {
  try {
    check_simplex(p, tol);
    return true;
  } catch (const InvalidInput&) {
    return false;
  }
}

/// A finite probability vector. Construction validates the invariants.
class SimplexVector {
 public:
  explicit SimplexVector(Vector entries) : entries_(std::move(entries)) { check_simplex(entries_); }

  static SimplexVector uniform(std::size_t dim) {
    if (dim == 0) throw InvalidInput("uniform distribution needs dim > 0");
    return SimplexVector(Vector(dim, 1.0 / static_cast<double>(dim)));
  }

  std::size_t dim() const noexcept { return entries_.size(); }
  double operator[](std::size_t i) const { return entries_[i]; }
  const Vector& entries() const noexcept { return entries_; }
  operator ConstSpan() const noexcept { return entries_; }

 private:
  Vector entries_;
};

/// Indicator vector 1_y of length dim.
inline SimplexVector one_hot(std::size_t y, std::size_t dim) {
  if (dim == 0 || y >= dim) {
    throw InvalidInput("label " + std::to_string(y) + " out of range for dimension " +
                       std::to_string(dim));
  }
  Vector v(dim, 0.0);
  v[y] = 1.0;
  return SimplexVector(std::move(v));
}

}  // namespace pdl

#endif  // PDL_SIMPLEX_HPP_
