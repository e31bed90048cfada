#ifndef PDL_FINITE_PD_HPP_
#define PDL_FINITE_PD_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pdl/errors.hpp"
#include "pdl/linalg.hpp"
#include "pdl/simplex.hpp"

namespace pdl {

/// One draw (x, y) from a finite joint distribution.
struct LabeledPair {
  std::size_t x = 0;
  std::size_t y = 0;
  bool operator==(const LabeledPair&) const = default;
};

/// Joint probability table over a finite feature set X and label set Y.
///
/// The embedding maps each feature index to the model input used for it.
class FinitePD {
 public:
  static constexpr double kSumTol = 1e-12;

  FinitePD(Matrix joint, std::vector<Vector> embedding)
      : joint_(std::move(joint)), embedding_(std::move(embedding)) {
    if (joint_.rows() == 0 || joint_.cols() == 0) throw InvalidInput("empty joint table");
    if (embedding_.size() != joint_.rows()) {
      throw InvalidInput("feature embedding has " + std::to_string(embedding_.size()) +
                         " entries for " + std::to_string(joint_.rows()) + " features");
    }
    for (double p : joint_.data()) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidInput("joint entries must be finite and >= 0");
    }
    const double total = pairwise_sum(joint_.data());
    if (std::abs(total - 1.0) > kSumTol) {
      throw InvalidInput("joint table sums to " + std::to_string(total) + ", not 1");
    }
  }

  std::size_t card_x() const noexcept { return joint_.rows(); }
  std::size_t card_y() const noexcept { return joint_.cols(); }
  const Matrix& joint() const noexcept { return joint_; }
  double operator()(std::size_t x, std::size_t y) const { return joint_(x, y); }

  const Vector& embedding(std::size_t x) const { return embedding_.at(x); }
  const std::vector<Vector>& embeddings() const noexcept { return embedding_; }

  double marginal_x(std::size_t x) const { return pairwise_sum(joint_.row(x)); }

  Vector marginal_x() const {
    Vector m(card_x());
    for (std::size_t x = 0; x < card_x(); ++x) m[x] = marginal_x(x);
    return m;
  }

  Vector marginal_y() const {
    Vector m(card_y(), 0.0);
    Vector column(card_x());
    for (std::size_t y = 0; y < card_y(); ++y) {
      for (std::size_t x = 0; x < card_x(); ++x) column[x] = joint_(x, y);
      m[y] = pairwise_sum(column);
    }
    return m;
  }

  /// q_{Y|x}: row x normalized by its marginal.
  SimplexVector conditional(std::size_t x) const {
    if (x >= card_x()) throw InvalidInput("feature index out of range");
    const double mx = marginal_x(x);
    if (!(mx > 0.0)) {
      throw InvalidInput("feature " + std::to_string(x) + " has zero marginal probability");
    }
    Vector row(joint_.row(x).begin(), joint_.row(x).end());
    for (double& p : row) p /= mx;
    // Re-normalize away the rounding left by the division.
    double total = 0.0;
    for (double p : row) total += p;
    for (double& p : row) p /= total;
    return SimplexVector(std::move(row));
  }

 private:
  Matrix joint_;
  std::vector<Vector> embedding_;
};

/// Count table of n samples over the support of a FinitePD.
class EmpiricalPD {
 public:
  EmpiricalPD(std::size_t card_x, std::size_t card_y)
      : card_x_(card_x), card_y_(card_y), counts_(card_x * card_y, 0) {
    if (card_x == 0 || card_y == 0) throw InvalidInput("empirical table needs nonempty support");
  }

  void add(const LabeledPair& s) {
    if (s.x >= card_x_ || s.y >= card_y_) throw InvalidInput("sample outside the support");
    ++counts_[s.x * card_y_ + s.y];
    ++n_;
  }

  std::size_t card_x() const noexcept { return card_x_; }
  std::size_t card_y() const noexcept { return card_y_; }
  std::uint64_t n() const noexcept { return n_; }
  std::uint64_t count(std::size_t x, std::size_t y) const { return counts_.at(x * card_y_ + y); }

  std::uint64_t count_x(std::size_t x) const {
    std::uint64_t c = 0;
    for (std::size_t y = 0; y < card_y_; ++y) c += count(x, y);
    return c;
  }

  /// counts / n as a joint table over the full support. Features never
  /// observed keep an all-zero row (conditioning on them is rejected).
  FinitePD joint(std::vector<Vector> embedding) const {
    if (n_ == 0) throw InvalidInput("empirical distribution of zero samples");
    Matrix table(card_x_, card_y_);
    for (std::size_t x = 0; x < card_x_; ++x) {
      for (std::size_t y = 0; y < card_y_; ++y) {
        table(x, y) = static_cast<double>(count(x, y)) / static_cast<double>(n_);
      }
    }
    return FinitePD(std::move(table), std::move(embedding));
  }

 private:
  std::size_t card_x_;
  std::size_t card_y_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t n_ = 0;
};

inline EmpiricalPD empirical_from_samples(const std::vector<LabeledPair>& samples, std::size_t card_x,
                                          std::size_t card_y) {
  if (samples.empty()) throw InvalidInput("empirical distribution needs at least one sample");
  EmpiricalPD e(card_x, card_y);
  for (const auto& s : samples) e.add(s);
  return e;
}

/// L1 distance between two joint tables of equal shape.
inline double l1_distance(const FinitePD& a, const FinitePD& b) {
  if (a.card_x() != b.card_x() || a.card_y() != b.card_y()) {
    throw InvalidInput("l1_distance: support mismatch");
  }
  Vector diff = sub(a.joint().data(), b.joint().data());
  for (double& d : diff) d = std::abs(d);
  return pairwise_sum(diff);
}

}  // namespace pdl

#endif  // PDL_FINITE_PD_HPP_
