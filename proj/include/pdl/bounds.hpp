#ifndef PDL_BOUNDS_HPP_
#define PDL_BOUNDS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "pdl/dataio.hpp"
#include "pdl/errors.hpp"
#include "pdl/finite_pd.hpp"
#include "pdl/generators.hpp"
#include "pdl/linalg.hpp"
#include "pdl/netcore.hpp"
#include "pdl/parallel.hpp"
#include "pdl/rng.hpp"

namespace pdl {

/// f_theta(x) for every feature of q, in feature order.
inline std::vector<Vector> support_outputs(const Network& net, const ParamVector& theta, const FinitePD& q) {
  std::vector<Vector> out(q.card_x());
  parallel_for(q.card_x(), [&](std::size_t x) { out[x] = net.forward(theta, q.embedding(x)); });
  return out;
}

/// Per-pair losses d_Phi(1_y, f(x)) over the full X x Y grid.
inline Matrix support_losses(const GeneratorSpec& gen, const std::vector<Vector>& outputs, std::size_t card_y) {
  Matrix l(outputs.size(), card_y);
  for (std::size_t x = 0; x < outputs.size(); ++x) {
    for (std::size_t y = 0; y < card_y; ++y) l(x, y) = fy_loss_label(gen, y, outputs[x]);
  }
  return l;
}

/// Sum of q(x, y) * loss(x, y) with pairwise summation.
inline double expect(const FinitePD& q, const Matrix& losses) {
  Vector terms(q.card_x() * q.card_y());
  for (std::size_t x = 0; x < q.card_x(); ++x) {
    for (std::size_t y = 0; y < q.card_y(); ++y) terms[x * q.card_y() + y] = q(x, y) * losses(x, y);
  }
  return pairwise_sum(terms);
}

/// L_Phi(q, f_theta) by exact summation over the finite support.
inline double risk(const GeneratorSpec& gen, const FinitePD& q, const Network& net, const ParamVector& theta) {
  if (gen.dim != q.card_y()) throw InvalidInput("generator dimension differs from |Y|");
  return expect(q, support_losses(gen, support_outputs(net, theta, q), q.card_y()));
}

inline double risk(const GeneratorSpec& gen, const EmpiricalPD& qhat, const std::vector<Vector>& embedding,
                   const Network& net, const ParamVector& theta) {
  return risk(gen, qhat.joint(embedding), net, theta);
}

/// grad_theta L_Phi(q, f_theta) = sum_x q_X(x) J_x^T (grad Phi*(f(x)) - q_{Y|x}).
inline Vector risk_gradient(const GeneratorSpec& gen, const FinitePD& q, const Network& net,
                            const ParamVector& theta) {
  if (gen.dim != q.card_y()) throw InvalidInput("generator dimension differs from |Y|");
  std::vector<Vector> parts(q.card_x());
  parallel_for(q.card_x(), [&](std::size_t x) {
    const auto tape = net.record(theta, q.embedding(x));
    const Vector p = grad_conjugate(gen, tape.output);
    Vector e(q.card_y());
    for (std::size_t y = 0; y < q.card_y(); ++y) e[y] = q.marginal_x(x) * p[y] - q(x, y);
    parts[x] = net.backward(theta, tape, e);
  });
  Vector g(theta.size(), 0.0);
  for (const auto& part : parts) axpy(1.0, part, g);
  return g;
}

/// |L_Phi(q, f) - Ent_Phi(1_Y|X) - E_X d_Phi(q_{Y|X}, f(X))|.
inline double risk_decomposition_residual(const GeneratorSpec& gen, const FinitePD& q, const Network& net,
                                          const ParamVector& theta) {
  const auto outputs = support_outputs(net, theta, q);
  const double total = expect(q, support_losses(gen, outputs, q.card_y()));
  const EntropyTerms ent = generalized_entropy_terms(gen, q);
  Vector fit_terms;
  for (std::size_t x = 0; x < q.card_x(); ++x) {
    const double qx = q.marginal_x(x);
    if (qx <= 0.0) continue;
    fit_terms.push_back(qx * fy_loss(gen, q.conditional(x), outputs[x]));
  }
  return std::abs(total - ent.cond_ent - pairwise_sum(fit_terms));
}

struct RiskBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// [Ent_Phi(1_Y|X), Ent_Phi(1_Y|X) + Ent_Phi(q_{Y|X})]: range of the best
/// achievable risk for a model family that can express every conditional.
inline RiskBounds risk_bounds(const GeneratorSpec& gen, const FinitePD& q) {
  const EntropyTerms t = generalized_entropy_terms(gen, q);
  return {t.cond_ent, t.cond_ent + t.mut_info};
}

/// gamma = max over (x, y) in X x Y of d_Phi(1_y, f(x)).
inline double gamma_max_loss(const GeneratorSpec& gen, const Network& net, const ParamVector& theta,
                             const FinitePD& q) {
  const Matrix l = support_losses(gen, support_outputs(net, theta, q), q.card_y());
  return *std::max_element(l.data().begin(), l.data().end());
}

/// -log of the smallest softmax probability over the support.
inline double gamma_from_pmin(const Network& net, const ParamVector& theta, const FinitePD& q) {
  double log_pmin = std::numeric_limits<double>::infinity();
  for (const auto& f : support_outputs(net, theta, q)) {
    const double lse = log_sum_exp(f);
    for (double z : f) log_pmin = std::min(log_pmin, z - lse);
  }
  return -log_pmin;
}

/// zeta = |X| minus the number of distinct outputs over the support;
/// outputs within L-infinity distance match_tol count as one.
inline std::size_t information_loss(const Network& net, const ParamVector& theta, const FinitePD& q,
                                    double match_tol = 1e-9) {
  if (!(match_tol >= 0.0)) throw InvalidInput("match_tol must be >= 0");
  const auto outputs = support_outputs(net, theta, q);
  std::vector<const Vector*> distinct;
  for (const auto& f : outputs) {
    const bool seen = std::any_of(distinct.begin(), distinct.end(),
                                  [&](const Vector* d) { return norm_inf(sub(*d, f)) <= match_tol; });
    if (!seen) distinct.push_back(&f);
  }
  return outputs.size() - distinct.size();
}

struct GenBound {
  double prob = 0.0;
  bool valid = false;
};

/// Smallest epsilon at which the concentration bound applies.
inline double gen_bound_threshold(double gamma, std::size_t zeta, std::size_t card_x, std::size_t card_y,
                                  std::uint64_t n) {
  return gamma * std::sqrt(5.0 * static_cast<double>(card_x - zeta) * static_cast<double>(card_y) /
                           static_cast<double>(n));
}

/// Pr(|L(q, f) - L(qhat, f)| >= eps) <= 3 exp(-4 n eps^2 / (25 gamma^2)).
inline GenBound gen_bound(double gamma, std::size_t zeta, std::size_t card_x, std::size_t card_y,
                          std::uint64_t n, double eps) {
  if (!(gamma > 0.0)) throw InvalidInput("gamma must be > 0");
  if (n == 0) throw InvalidInput("n must be >= 1");
  if (zeta > card_x) throw InvalidInput("zeta exceeds |X|");
  const double nd = static_cast<double>(n);
  return {3.0 * std::exp(-4.0 * nd * eps * eps / (25.0 * gamma * gamma)),
          eps >= gen_bound_threshold(gamma, zeta, card_x, card_y, n)};
}

/// Binomial 3-sigma allowance for a frequency estimated from `trials` draws.
inline double binomial_slack(double p, std::size_t trials) {
  const double pc = std::clamp(p, 0.0, 1.0);
  return 3.0 * std::sqrt(pc * (1.0 - pc) / static_cast<double>(trials));
}

struct GenBoundReport {
  double gamma = 0.0;
  std::size_t zeta = 0;
  std::uint64_t n = 0;
  std::size_t trials = 0;
  double true_risk = 0.0;
  Vector eps_grid;
  Vector bound_values;
  Vector empirical_exceedance;
  std::vector<bool> valid;
  double valid_from = 0.0;
  double max_gap = 0.0;

  /// Exceedance within bound + 3 sigma at every valid epsilon.
  bool holds() const {
    for (std::size_t i = 0; i < eps_grid.size(); ++i) {
      if (valid[i] && empirical_exceedance[i] > bound_values[i] + binomial_slack(bound_values[i], trials)) {
        return false;
      }
    }
    return true;
  }
};

/// Monte Carlo frequency of |L(q, f) - L(qhat_n, f)| >= eps over `trials`
/// independent samples; trial t uses seed base_seed + t.
inline GenBoundReport mc_generalization_check(const GeneratorSpec& gen, const Network& net,
                                              const ParamVector& theta, const FinitePD& q, std::uint64_t n,
                                              std::size_t trials, const Vector& eps_grid, std::uint64_t seed,
                                              double match_tol = 1e-9) {
  if (trials < 100) throw InvalidInput("mc_generalization_check needs at least 100 trials");
  const auto outputs = support_outputs(net, theta, q);
  const Matrix losses = support_losses(gen, outputs, q.card_y());
  GenBoundReport r;
  r.gamma = *std::max_element(losses.data().begin(), losses.data().end());
  r.zeta = information_loss(net, theta, q, match_tol);
  r.n = n;
  r.trials = trials;
  r.true_risk = expect(q, losses);
  r.eps_grid = eps_grid;
  r.valid_from = gen_bound_threshold(r.gamma, r.zeta, q.card_x(), q.card_y(), n);

  Vector gaps(trials);
  parallel_for(trials, [&](std::size_t t) {
    const auto draws = sample(q, n, seed + t);
    const EmpiricalPD e = empirical_from_samples(draws, q.card_x(), q.card_y());
    Vector terms(q.card_x() * q.card_y());
    for (std::size_t x = 0; x < q.card_x(); ++x) {
      for (std::size_t y = 0; y < q.card_y(); ++y) {
        terms[x * q.card_y() + y] = static_cast<double>(e.count(x, y)) / static_cast<double>(n) * losses(x, y);
      }
    }
    gaps[t] = std::abs(r.true_risk - pairwise_sum(terms));
  });
  r.max_gap = *std::max_element(gaps.begin(), gaps.end());

  for (double eps : eps_grid) {
    std::size_t hits = 0;
    for (double g : gaps) hits += g >= eps ? 1 : 0;
    r.empirical_exceedance.push_back(static_cast<double>(hits) / static_cast<double>(trials));
    const GenBound b = gen_bound(r.gamma, r.zeta, q.card_x(), q.card_y(), n, eps);
    r.bound_values.push_back(b.prob);
    r.valid.push_back(b.valid);
  }
  return r;
}

struct L1ConcentrationReport {
  std::uint64_t n = 0;
  std::size_t trials = 0;
  std::size_t support = 0;
  Vector eps_grid;
  Vector bound_values;  // 3 exp(-n eps^2 / 25)
  Vector empirical_exceedance;
  std::vector<bool> valid;  // eps >= sqrt(20 k / n)

  bool holds() const {
    for (std::size_t i = 0; i < eps_grid.size(); ++i) {
      if (valid[i] && empirical_exceedance[i] > bound_values[i] + binomial_slack(bound_values[i], trials)) {
        return false;
      }
    }
    return true;
  }
};

/// Monte Carlo check of Pr(||q - qhat_n||_1 >= eps) <= 3 exp(-n eps^2 / 25)
/// for a distribution on k = |X||Y| points.
inline L1ConcentrationReport l1_concentration_check(const FinitePD& q, std::uint64_t n, std::size_t trials,
                                                    const Vector& eps_grid, std::uint64_t seed) {
  L1ConcentrationReport r;
  r.n = n;
  r.trials = trials;
  r.support = q.card_x() * q.card_y();
  r.eps_grid = eps_grid;
  Vector dist(trials);
  parallel_for(trials, [&](std::size_t t) {
    const auto draws = sample(q, n, seed + t);
    dist[t] = l1_distance(q, empirical_from_samples(draws, q.card_x(), q.card_y()).joint(q.embeddings()));
  });
  const double threshold = std::sqrt(20.0 * static_cast<double>(r.support) / static_cast<double>(n));
  for (double eps : eps_grid) {
    std::size_t hits = 0;
    for (double d : dist) hits += d >= eps ? 1 : 0;
    r.empirical_exceedance.push_back(static_cast<double>(hits) / static_cast<double>(trials));
    r.bound_values.push_back(3.0 * std::exp(-static_cast<double>(n) * eps * eps / 25.0));
    r.valid.push_back(eps >= threshold);
  }
  return r;
}

struct RegProbe {
  double a_hat = 0.0;
  double b_hat = 0.0;
  double r_at_zero = 0.0;
  std::size_t samples = 0;
};

/// Envelope of R(theta) / ||theta||^2 with R(theta) = Phi*(f_theta(x)) - Phi*(0),
/// over theta drawn uniformly on spheres of the given radii.
inline RegProbe reg_equivalence_probe(const GeneratorSpec& gen, const Network& net, ConstSpan x,
                                      const Vector& radii, std::size_t samples_per_radius, std::uint64_t seed) {
  if (radii.empty() || samples_per_radius == 0) throw InvalidInput("probe needs radii and samples");
  const std::size_t m = net.param_count();
  const ParamVector zero = ParamVector::zeros(net.spec());
  const double phi0 = eval_conjugate(gen, Vector(net.spec().output_dim, 0.0));
  RegProbe p;
  p.r_at_zero = eval_conjugate(gen, net.forward(zero, x)) - phi0;
  p.a_hat = std::numeric_limits<double>::infinity();
  p.b_hat = -std::numeric_limits<double>::infinity();
  Rng rng(seed);
  for (double radius : radii) {
    if (!(radius > 0.0)) throw InvalidInput("probe radii must be > 0");
    for (std::size_t s = 0; s < samples_per_radius; ++s) {
      Vector dir(m);
      double n = 0.0;
      do {
        for (double& v : dir) v = rng.normal();
        n = norm2(dir);
      } while (n == 0.0);
      for (double& v : dir) v *= radius / n;
      const double nsq = norm2_sq(dir);
      const double r = eval_conjugate(gen, net.forward(zero.with_values(std::move(dir)), x)) - phi0;
      p.a_hat = std::min(p.a_hat, r / nsq);
      p.b_hat = std::max(p.b_hat, r / nsq);
      ++p.samples;
    }
  }
  return p;
}

/// gamma(t * theta) for each scale t, for tracing gamma against ||theta||.
inline Vector gamma_along_ray(const GeneratorSpec& gen, const Network& net, const ParamVector& theta,
                              const FinitePD& q, const Vector& scales) {
  Vector out;
  for (double t : scales) out.push_back(gamma_max_loss(gen, net, theta.with_values(scaled(theta.values(), t)), q));
  return out;
}

}  // namespace pdl

#endif  // PDL_BOUNDS_HPP_
