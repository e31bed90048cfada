#ifndef PDL_DIAGNOSTICS_HPP_
#define PDL_DIAGNOSTICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pdl/errors.hpp"
#include "pdl/generators.hpp"
#include "pdl/linalg.hpp"

namespace pdl {

inline constexpr double kRankTol = 1e-10;
inline constexpr double kSymmetryTol = 1e-12;

/// A_x = J J^T: Gram matrix of the per-output parameter-gradient rows, so
/// that e^T A_x e = ||J^T e||^2.
inline Matrix structure_matrix(const Matrix& jac) {
  const std::size_t n = jac.rows();
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = dot(jac.row(i), jac.row(j));
      a(i, j) = v;
      a(j, i) = v;
    }
  }
  return a;
}

inline double off_diagonal_norm(const Matrix& s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t j = 0; j < s.cols(); ++j) {
      if (i != j) acc += s(i, j) * s(i, j);
    }
  }
  return std::sqrt(acc);
}

/// Eigen-decomposition S = V diag(values) V^T; values ascending and
/// vectors stored as the columns of V in matching order.
struct SymEigen {
  Vector values;
  Matrix vectors;
  int sweeps = 0;
  double off_norm = 0.0;
};

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm falls
/// below tol * ||S||_F. Throws NumericalFailure after max_sweeps.
inline SymEigen jacobi_eigen(const Matrix& s, double tol = 1e-12, int max_sweeps = 100) {
  const std::size_t n = s.rows();
  if (n == 0 || s.cols() != n) throw InvalidInput("eigen solve needs a nonempty square matrix");
  const double scale = s.frobenius_norm();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(s(i, j) - s(j, i)) > kSymmetryTol * std::max(1.0, scale)) {
        throw InvalidInput("eigen solve needs a symmetric matrix");
      }
    }
  }
  if (!all_finite(s.data())) throw InvalidInput("eigen solve on a non-finite matrix");

  Matrix a = s;
  Matrix v = Matrix::identity(n);
  SymEigen out;
  const double target = tol * scale;
  double off = off_diagonal_norm(a);
  int sweep = 0;
  while (off > target) {
    if (sweep == max_sweeps) {
      throw NumericalFailure("Jacobi eigensolver did not converge in " + std::to_string(max_sweeps) +
                                 " sweeps",
                             off);
    }
    ++sweep;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          if (k != p && k != q) {
            const double akp = a(k, p);
            const double akq = a(k, q);
            a(k, p) = c * akp - sn * akq;
            a(p, k) = a(k, p);
            a(k, q) = sn * akp + c * akq;
            a(q, k) = a(k, q);
          }
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
    off = off_diagonal_norm(a);
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = a(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  out.sweeps = sweep;
  out.off_norm = off;
  return out;
}

struct ExtremeEigs {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
};

inline ExtremeEigs sym_eigs_extreme(const Matrix& s, double tol = 1e-12, int max_sweeps = 100) {
  const SymEigen e = jacobi_eigen(s, tol, max_sweeps);
  return {e.values.front(), e.values.back()};
}

/// ||g||_2^2 (the gradient energy with exponent 2).
inline double gradient_energy(ConstSpan g) { return norm2_sq(g); }

struct SampleBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// ||g||^2 / lambda_max <= ||1_y - p||^2 <= ||g||^2 / lambda_min.
inline SampleBounds sample_bounds(ConstSpan g, double lambda_min, double lambda_max,
                                  double rank_tol = kRankTol) {
  if (lambda_min <= rank_tol) throw RankDeficient(lambda_min, rank_tol);
  if (lambda_max < lambda_min) throw InvalidInput("lambda_max < lambda_min");
  const double energy = gradient_energy(g);
  return {energy / lambda_max, energy / lambda_min};
}

/// ||1_y - grad Phi*(logits)||^2, i.e. 2 D_{L2^2/2} between label and prediction.
inline double fitting_error_l2(const GeneratorSpec& gen, std::size_t y, ConstSpan logits) {
  return norm2_sq(link_error(gen, y, logits));
}

inline double dataset_lambda_min(ConstSpan lambdas) {
  if (lambdas.empty()) throw InvalidInput("dataset_lambda_min of an empty sequence");
  return *std::min_element(lambdas.begin(), lambdas.end());
}

inline constexpr double kPearsonMinVariance = 1e-18;

/// Pearson coefficient of a[t-w+1..t] against b[t-w+1..t] for each t;
/// nullopt where t < w-1 or either window is (numerically) constant.
inline std::vector<std::optional<double>> local_pearson(ConstSpan a, ConstSpan b, std::size_t window) {
  if (a.size() != b.size()) throw InvalidInput("local_pearson: sequences differ in length");
  if (window < 2) throw InvalidInput("local_pearson: window must be >= 2");
  if (a.size() < window) throw InvalidInput("local_pearson: sequence shorter than the window");
  std::vector<std::optional<double>> out(a.size());
  for (std::size_t t = window - 1; t < a.size(); ++t) {
    const std::size_t start = t + 1 - window;
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = start; i <= t; ++i) {
      ma += a[i];
      mb += b[i];
    }
    ma /= static_cast<double>(window);
    mb /= static_cast<double>(window);
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = start; i <= t; ++i) {
      const double da = a[i] - ma;
      const double db = b[i] - mb;
      saa += da * da;
      sbb += db * db;
      sab += da * db;
    }
    const double denom = static_cast<double>(window - 1);
    if (!std::isfinite(saa) || !std::isfinite(sbb)) continue;
    if (saa / denom < kPearsonMinVariance || sbb / denom < kPearsonMinVariance) continue;
    out[t] = sab / std::sqrt(saa * sbb);
  }
  return out;
}

/// One logged training step. Eigen-dependent fields are empty on steps
/// where the structure matrices were not computed or were rank deficient.
struct MetricsRow {
  long step = 0;
  double risk_surrogate = 0.0;  // batch mean of ||1_y - p||^2
  double grad_energy = 0.0;     // batch mean of ||g(x, y)||^2
  std::optional<double> lambda_min;
  std::optional<double> lambda_max;
  std::optional<double> lower_bound;
  std::optional<double> upper_bound;
  double batch_loss = 0.0;  // G(theta_k, s_k)

  double log2_risk() const { return std::log2(risk_surrogate); }
};

/// local_pearson of log2 risk against log2 upper/lower, taken over the rows
/// that carry both bounds. `index` maps each series position back to its row.
struct BoundCorrelation {
  std::vector<std::size_t> index;
  std::vector<std::optional<double>> upper;
  std::vector<std::optional<double>> lower;
};

inline BoundCorrelation bound_correlations(const std::vector<MetricsRow>& rows, std::size_t window) {
  BoundCorrelation c;
  Vector risk, up, lo;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (!r.lower_bound || !r.upper_bound) continue;
    c.index.push_back(i);
    risk.push_back(r.log2_risk());
    up.push_back(std::log2(*r.upper_bound));
    lo.push_back(std::log2(*r.lower_bound));
  }
  if (c.index.size() < window) {
    c.upper.assign(c.index.size(), std::nullopt);
    c.lower.assign(c.index.size(), std::nullopt);
    return c;
  }
  c.upper = local_pearson(risk, up, window);
  c.lower = local_pearson(risk, lo, window);
  return c;
}

}  // namespace pdl

#endif  // PDL_DIAGNOSTICS_HPP_
