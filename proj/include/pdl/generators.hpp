#ifndef PDL_GENERATORS_HPP_
#define PDL_GENERATORS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>

#include "pdl/errors.hpp"
#include "pdl/finite_pd.hpp"
#include "pdl/linalg.hpp"
#include "pdl/simplex.hpp"

namespace pdl {

/// Floor applied to probabilities inside logarithms.
inline constexpr double kProbFloor = 1e-300;

/// Psi(mu) = ||a mu||_2^r / r with order r > 1 and scale a > 0.
struct NormPowerFn {
  double order = 2.0;
  double scale = 1.0;

  NormPowerFn() = default;
  NormPowerFn(double r, double a) : order(r), scale(a) {
    if (!(r > 1.0) || !std::isfinite(r)) throw InvalidInput("norm power order must be > 1");
    if (!(a > 0.0) || !std::isfinite(a)) throw InvalidInput("norm power scale must be > 0");
  }

  double operator()(ConstSpan mu) const { return std::pow(scale * norm2(mu), order) / order; }

  /// a^r ||mu||^(r-2) mu; zero at the origin (r > 1 makes it continuous there).
  Vector gradient(ConstSpan mu) const {
    const double n = norm2(mu);
    if (n == 0.0) return Vector(mu.size(), 0.0);
    return scaled(mu, std::pow(scale, order) * std::pow(n, order - 2.0));
  }

  bool operator==(const NormPowerFn&) const = default;
};

/// The conjugate of a norm power function is again one, with
/// 1/r + 1/r* = 1 and a a* = 1.
inline NormPowerFn conjugate_norm_power(const NormPowerFn& np) {
  return NormPowerFn(np.order / (np.order - 1.0), 1.0 / np.scale);
}

/// |<mu, grad Psi(mu)> - r Psi(mu)|, zero for an r-homogeneous Psi.
inline double euler_residual(const NormPowerFn& np, ConstSpan mu) {
  return std::abs(dot(mu, np.gradient(mu)) - np.order * np(mu));
}

/// A convex generator Phi together with its conjugate and both gradient maps.
///
/// NegEntropySimplex is Omega + I_C with Omega the negative Shannon entropy
/// and C the probability simplex; its conjugate is log-sum-exp and the
/// prediction link is softmax.
struct GeneratorSpec {
  enum class Variant { SquaredL2, NegEntropySimplex, NormPower };

  Variant variant = Variant::NegEntropySimplex;
  NormPowerFn norm_power{};  // NormPower only
  std::size_t dim = 0;

  static GeneratorSpec squared_l2(std::size_t dim) { return make(Variant::SquaredL2, {}, dim); }
  static GeneratorSpec neg_entropy(std::size_t dim) {
    return make(Variant::NegEntropySimplex, {}, dim);
  }
  static GeneratorSpec norm_power_fn(std::size_t dim, double order, double scale) {
    return make(Variant::NormPower, NormPowerFn(order, scale), dim);
  }

  bool operator==(const GeneratorSpec&) const = default;

 private:
  static GeneratorSpec make(Variant v, NormPowerFn np, std::size_t dim) {
    if (dim == 0) throw InvalidInput("generator dimension must be positive");
    GeneratorSpec g;
    g.variant = v;
    g.norm_power = np;
    g.dim = dim;
    return g;
  }
};

inline std::string_view variant_name(GeneratorSpec::Variant v) {
  switch (v) {
    case GeneratorSpec::Variant::SquaredL2: return "SquaredL2";
    case GeneratorSpec::Variant::NegEntropySimplex: return "NegEntropySimplex";
    case GeneratorSpec::Variant::NormPower: return "NormPower";
  }
  return "?";
}

inline GeneratorSpec::Variant parse_variant(std::string_view name) {
  if (name == "SquaredL2") return GeneratorSpec::Variant::SquaredL2;
  if (name == "NegEntropySimplex") return GeneratorSpec::Variant::NegEntropySimplex;
  if (name == "NormPower") return GeneratorSpec::Variant::NormPower;
  throw InvalidInput("unknown generator variant '" + std::string(name) + "'");
}

namespace detail {

inline void check_dim(const GeneratorSpec& gen, ConstSpan v, const char* what) {
  if (v.size() != gen.dim) {
    throw InvalidInput(std::string(what) + ": expected dimension " + std::to_string(gen.dim) +
                       ", got " + std::to_string(v.size()));
  }
}

inline double xlogx(double p) { return p == 0.0 ? 0.0 : p * std::log(std::max(p, kProbFloor)); }

}  // namespace detail

/// log(sum exp(nu_i)), shifted by the maximum entry so large logits do not overflow.
inline double log_sum_exp(ConstSpan nu) {
  if (nu.empty()) throw InvalidInput("log_sum_exp of an empty vector");
  const double m = *std::max_element(nu.begin(), nu.end());
  double s = 0.0;
  for (double v : nu) s += std::exp(v - m);
  return m + std::log(s);
}

inline Vector softmax(ConstSpan nu) {
  if (nu.empty()) throw InvalidInput("softmax of an empty vector");
  const double m = *std::max_element(nu.begin(), nu.end());
  Vector p(nu.size());
  double s = 0.0;
  for (std::size_t i = 0; i < nu.size(); ++i) {
    p[i] = std::exp(nu[i] - m);
    s += p[i];
  }
  for (double& x : p) x /= s;
  return p;
}

inline double eval_phi(const GeneratorSpec& gen, ConstSpan mu) {
  detail::check_dim(gen, mu, "eval_phi");
  switch (gen.variant) {
    case GeneratorSpec::Variant::SquaredL2:
      return 0.5 * norm2_sq(mu);
    case GeneratorSpec::Variant::NegEntropySimplex: {
      check_simplex(mu);
      double s = 0.0;
      for (double p : mu) s += detail::xlogx(p);
      return s;
    }
    case GeneratorSpec::Variant::NormPower:
      return gen.norm_power(mu);
  }
  return 0.0;
}

/// grad Phi(mu). For the simplex generator the gradient is defined up to a
/// multiple of the all-ones vector; the representative (log mu_i) is used.
/// Fenchel-Young losses and Bregman gaps do not depend on that choice.
inline Vector grad_phi(const GeneratorSpec& gen, ConstSpan mu) {
  detail::check_dim(gen, mu, "grad_phi");
  switch (gen.variant) {
    case GeneratorSpec::Variant::SquaredL2:
      return Vector(mu.begin(), mu.end());
    case GeneratorSpec::Variant::NegEntropySimplex: {
      check_simplex(mu);
      Vector g(mu.size());
      for (std::size_t i = 0; i < mu.size(); ++i) {
        if (!(mu[i] > 0.0)) {
          throw InvalidInput("grad_phi: entropy gradient undefined on the simplex boundary (entry " +
                             std::to_string(i) + " is zero)");
        }
        g[i] = std::log(mu[i]);
      }
      return g;
    }
    case GeneratorSpec::Variant::NormPower:
      return gen.norm_power.gradient(mu);
  }
  return {};
}

inline double eval_conjugate(const GeneratorSpec& gen, ConstSpan nu) {
  detail::check_dim(gen, nu, "eval_conjugate");
  switch (gen.variant) {
    case GeneratorSpec::Variant::SquaredL2:
      return 0.5 * norm2_sq(nu);
    case GeneratorSpec::Variant::NegEntropySimplex:
      return log_sum_exp(nu);
    case GeneratorSpec::Variant::NormPower:
      return conjugate_norm_power(gen.norm_power)(nu);
  }
  return 0.0;
}

/// The prediction link grad Phi*(nu).
inline Vector grad_conjugate(const GeneratorSpec& gen, ConstSpan nu) {
  detail::check_dim(gen, nu, "grad_conjugate");
  switch (gen.variant) {
    case GeneratorSpec::Variant::SquaredL2:
      return Vector(nu.begin(), nu.end());
    case GeneratorSpec::Variant::NegEntropySimplex:
      return softmax(nu);
    case GeneratorSpec::Variant::NormPower:
      return conjugate_norm_power(gen.norm_power).gradient(nu);
  }
  return {};
}

/// d_Phi(mu, nu) = Phi(mu) + Phi*(nu) - <mu, nu>.
inline double fy_loss(const GeneratorSpec& gen, ConstSpan mu, ConstSpan nu) {
  return eval_phi(gen, mu) + eval_conjugate(gen, nu) - dot(mu, nu);
}

/// d_Phi(1_y, nu) without materializing the indicator vector.
inline double fy_loss_label(const GeneratorSpec& gen, std::size_t y, ConstSpan nu) {
  detail::check_dim(gen, nu, "fy_loss");
  if (y >= gen.dim) throw InvalidInput("label out of range");
  double phi_y = 0.0;
  switch (gen.variant) {
    case GeneratorSpec::Variant::SquaredL2: phi_y = 0.5; break;
    case GeneratorSpec::Variant::NegEntropySimplex: phi_y = 0.0; break;
    case GeneratorSpec::Variant::NormPower:
      phi_y = std::pow(gen.norm_power.scale, gen.norm_power.order) / gen.norm_power.order;
      break;
  }
  return phi_y + eval_conjugate(gen, nu) - nu[y];
}

/// grad_nu d_Phi(1_y, nu) = grad Phi*(nu) - 1_y, the link error.
inline Vector link_error(const GeneratorSpec& gen, std::size_t y, ConstSpan nu) {
  if (y >= gen.dim) throw InvalidInput("label out of range");
  Vector e = grad_conjugate(gen, nu);
  e[y] -= 1.0;
  return e;
}

/// S_Phi(mu, nu) = Phi(mu) - Phi(nu) - <grad Phi(nu), mu - nu>.
inline double bregman_gap(const GeneratorSpec& gen, ConstSpan mu, ConstSpan nu_point) {
  const Vector g = grad_phi(gen, nu_point);
  return eval_phi(gen, mu) - eval_phi(gen, nu_point) - dot(g, sub(mu, nu_point));
}

struct EntropyTerms {
  double cond_ent = 0.0;  // Ent_Phi(1_Y | X)
  double mut_info = 0.0;  // Ent_Phi(q_{Y|X})
};

/// Generalized conditional entropy and generalized mutual information of q.
/// With the simplex generator these are Shannon H(Y|X) and I(X;Y) in nats.
inline EntropyTerms generalized_entropy_terms(const GeneratorSpec& gen, const FinitePD& q) {
  if (gen.dim != q.card_y()) throw InvalidInput("generator dimension differs from |Y|");
  Vector phi_onehot(q.card_y());
  for (std::size_t y = 0; y < q.card_y(); ++y) phi_onehot[y] = eval_phi(gen, one_hot(y, q.card_y()));

  Vector cond_terms;
  Vector mi_terms;
  for (std::size_t x = 0; x < q.card_x(); ++x) {
    const double qx = q.marginal_x(x);
    if (qx <= 0.0) continue;
    const SimplexVector cond = q.conditional(x);
    const double phi_cond = eval_phi(gen, cond);
    cond_terms.push_back(qx * (dot(cond, phi_onehot) - phi_cond));
    mi_terms.push_back(qx * phi_cond);
  }
  const Vector qy = q.marginal_y();
  Vector qy_norm = qy;
  double total = 0.0;
  for (double p : qy_norm) total += p;
  for (double& p : qy_norm) p /= total;

  EntropyTerms t;
  t.cond_ent = pairwise_sum(cond_terms);
  t.mut_info = pairwise_sum(mi_terms) - eval_phi(gen, qy_norm);
  return t;
}

/// Shannon H(Y|X) and I(X;Y) in nats by direct summation over the joint.
inline EntropyTerms shannon_terms(const FinitePD& q) {
  const Vector qx = q.marginal_x();
  const Vector qy = q.marginal_y();
  Vector h_terms;
  Vector i_terms;
  for (std::size_t x = 0; x < q.card_x(); ++x) {
    for (std::size_t y = 0; y < q.card_y(); ++y) {
      const double p = q(x, y);
      if (p <= 0.0) continue;
      h_terms.push_back(-p * std::log(p / qx[x]));
      i_terms.push_back(p * std::log(p / (qx[x] * qy[y])));
    }
  }
  return {pairwise_sum(h_terms), pairwise_sum(i_terms)};
}

}  // namespace pdl

#endif  // PDL_GENERATORS_HPP_
