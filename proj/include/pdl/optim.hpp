#ifndef PDL_OPTIM_HPP_
#define PDL_OPTIM_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pdl/diagnostics.hpp"
#include "pdl/errors.hpp"
#include "pdl/generators.hpp"
#include "pdl/linalg.hpp"
#include "pdl/netcore.hpp"
#include "pdl/parallel.hpp"
#include "pdl/rng.hpp"

namespace pdl {

/// Training inputs with integer labels.
struct LabeledData {
  std::vector<Vector> inputs;
  std::vector<std::size_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

/// alpha = (||g||^2 / (r xi(g)))^(1/(r-1)); nullopt when g = 0 (converged).
/// With xi = ||a .||^r / r this is (||g||^(2-r) a^(-r))^(1/(r-1)), evaluated
/// in logs so tiny gradients do not underflow xi(g).
inline std::optional<double> optimal_step(ConstSpan g, const NormPowerFn& xi) {
  const double n = norm2(g);
  if (n == 0.0) return std::nullopt;
  const double r = xi.order;
  return std::exp(((2.0 - r) * std::log(n) - r * std::log(xi.scale)) / (r - 1.0));
}

inline ParamVector sgd_step(const ParamVector& theta, ConstSpan g, double alpha) {
  if (g.size() != theta.size()) {
    throw InvalidInput("sgd_step: gradient has " + std::to_string(g.size()) + " entries, parameters " +
                       std::to_string(theta.size()));
  }
  Vector next = theta.values();
  axpy(-alpha, g, next);
  return theta.with_values(std::move(next));
}

/// Guaranteed decrease of an H(xi)-smooth objective under the optimal step:
/// (1/r*) (||g||^2)^(r*) (r xi(g))^(-1/(r-1)), r* = r/(r-1), which for
/// xi = ||a .||^r / r simplifies to (1/r*) (||g|| / a)^(r*).
inline double descent_decrement(ConstSpan g, const NormPowerFn& xi) {
  const double n = norm2(g);
  if (n == 0.0) return 0.0;
  const double r_conj = xi.order / (xi.order - 1.0);
  return std::pow(n / xi.scale, r_conj) / r_conj;
}

/// An objective G with value and gradient.
struct Objective {
  std::function<double(ConstSpan)> value;
  std::function<Vector(ConstSpan)> gradient;
};

inline double bregman_gap(const Objective& f, ConstSpan a, ConstSpan b) {
  return f.value(a) - f.value(b) - dot(f.gradient(b), sub(a, b));
}

struct MajorantEstimate {
  NormPowerFn xi;            // inflated by the safety factor
  double fitted_scale = 0;   // smallest scale covering every probe
  std::size_t probes = 0;
};

inline constexpr double kMajorantSafety = 1.5;

/// Empirical smoothness majorant: the smallest a with
/// S_G(t1, t2) <= ||a (t1 - t2)||^order / order over random probe pairs
/// drawn uniformly from the cube of half-width `radius` around `center`,
/// then multiplied by the safety factor.
inline MajorantEstimate estimate_majorant(const Objective& f, ConstSpan center, double order,
                                          std::size_t probe_pairs, double radius, std::uint64_t seed,
                                          double safety = kMajorantSafety) {
  if (!(order > 1.0)) throw InvalidInput("majorant order must be > 1");
  if (probe_pairs == 0) throw InvalidInput("majorant estimation needs at least one probe");
  Rng rng(seed);
  double a = 0.0;
  Vector t1(center.size()), t2(center.size());
  for (std::size_t p = 0; p < probe_pairs; ++p) {
    for (std::size_t i = 0; i < center.size(); ++i) {
      t1[i] = center[i] + rng.uniform(-radius, radius);
      t2[i] = center[i] + rng.uniform(-radius, radius);
    }
    const double gap = bregman_gap(f, t1, t2);
    if (!std::isfinite(gap)) throw NumericalFailure("non-finite Bregman gap in majorant probe", gap);
    const double dist = norm2(sub(t1, t2));
    if (dist == 0.0 || gap <= 0.0) continue;
    a = std::max(a, std::pow(order * gap, 1.0 / order) / dist);
  }
  MajorantEstimate est;
  est.fitted_scale = a;
  est.probes = probe_pairs;
  // A non-positive gap everywhere is covered by any scale.
  est.xi = NormPowerFn(order, a > 0.0 ? safety * a : 1e-12);
  return est;
}

/// Mean Fenchel-Young loss of the network over a subset of the data.
inline double batch_loss(const Network& net, const ParamVector& theta, const GeneratorSpec& gen,
                         const LabeledData& data, std::span<const std::size_t> idx) {
  Vector losses(idx.size());
  parallel_for(idx.size(), [&](std::size_t i) {
    losses[i] = fy_loss_label(gen, data.labels[idx[i]], net.forward(theta, data.inputs[idx[i]]));
  });
  return mean(losses);
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

/// Batch objective G(theta) over a fixed index set, with its gradient.
inline Objective network_objective(const Network& net, const GeneratorSpec& gen, const LabeledData& data,
                                   const ParamVector& layout_source, std::vector<std::size_t> idx) {
  auto shared_idx = std::make_shared<std::vector<std::size_t>>(std::move(idx));
  Objective f;
  f.value = [&net, &gen, &data, layout_source, shared_idx](ConstSpan t) {
    return batch_loss(net, layout_source.with_values(Vector(t.begin(), t.end())), gen, data, *shared_idx);
  };
  f.gradient = [&net, &gen, &data, layout_source, shared_idx](ConstSpan t) {
    const ParamVector theta = layout_source.with_values(Vector(t.begin(), t.end()));
    const auto& idx = *shared_idx;
    std::vector<Vector> grads(idx.size());
    parallel_for(idx.size(), [&](std::size_t i) {
      grads[i] = loss_grad(net, theta, gen, data.inputs[idx[i]], data.labels[idx[i]]);
    });
    Vector g(theta.size(), 0.0);
    for (const auto& gi : grads) axpy(1.0 / static_cast<double>(idx.size()), gi, g);
    return g;
  };
  return f;
}

struct HSandwich {
  double lower = 0.0;  // Psi*(grad G), Psi = (lambda_max/2)||.||^2
  double mid = 0.0;    // G(mu) - G*
  double upper = 0.0;  // psi*(grad G), psi = (lambda_min/2)||.||^2
  bool ok = false;
};

/// Checks Psi*(grad G) <= G(mu) - G* <= psi*(grad G) for G(mu) = mu^T H mu / 2.
inline HSandwich h_sandwich_check(const Matrix& h, ConstSpan mu, double tol = 1e-9) {
  const ExtremeEigs eig = sym_eigs_extreme(h);
  if (!(eig.lambda_min > 0.0)) throw InvalidInput("h_sandwich_check needs a positive definite matrix");
  const NormPowerFn convex_minorant(2.0, std::sqrt(eig.lambda_min));
  const NormPowerFn smooth_majorant(2.0, std::sqrt(eig.lambda_max));
  const Vector grad = h.multiply(mu);
  HSandwich s;
  s.mid = 0.5 * dot(mu, grad);
  s.lower = conjugate_norm_power(smooth_majorant)(grad);
  s.upper = conjugate_norm_power(convex_minorant)(grad);
  s.ok = s.lower <= s.mid + tol * std::max(1.0, s.mid) && s.mid <= s.upper + tol * std::max(1.0, s.upper);
  return s;
}

struct SgdConfig {
  enum class Mode { FixedAlpha, OptimalFromXi };

  Mode mode = Mode::FixedAlpha;
  double alpha = 0.1;   // FixedAlpha
  NormPowerFn xi{};     // OptimalFromXi
  std::size_t batch_size = 64;
  long steps = 0;
  std::uint64_t seed = 0;
  long eigen_every = 1;
  bool measure_beta = false;
  double rank_tol = kRankTol;

  void validate() const {
    if (mode == Mode::FixedAlpha && !(alpha >= 0.0)) throw InvalidInput("alpha must be >= 0");
    if (batch_size == 0) throw InvalidInput("batch_size must be positive");
    if (steps < 0) throw InvalidInput("steps must be >= 0");
    if (eigen_every <= 0) throw InvalidInput("eigen_every must be positive");
  }

  bool operator==(const SgdConfig&) const = default;
};

struct TrainTrace {
  std::vector<MetricsRow> rows;
  ParamVector final_params;
  long descent_violations = 0;
  std::vector<double> beta;  // realized full-data / minibatch decrease ratios
};

/// Uniform minibatches without replacement, reshuffled at each epoch.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch, std::uint64_t seed)
      : order_(all_indices(n)), batch_(batch), rng_(seed) {
    if (batch == 0 || batch > n) {
      throw InvalidInput("batch size " + std::to_string(batch) + " invalid for " + std::to_string(n) +
                         " samples");
    }
    rng_.shuffle(std::span<std::size_t>(order_));
  }

  std::vector<std::size_t> next() {
    if (pos_ + batch_ > order_.size()) {
      rng_.shuffle(std::span<std::size_t>(order_));
      pos_ = 0;
    }
    std::vector<std::size_t> b(order_.begin() + static_cast<long>(pos_),
                               order_.begin() + static_cast<long>(pos_ + batch_));
    pos_ += batch_;
    return b;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_;
  std::size_t pos_ = 0;
  Rng rng_;
};

namespace detail {

struct SampleStats {
  double loss = 0.0;
  double fit = 0.0;
  double energy = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  Vector grad;
};

inline SampleStats evaluate_sample(const Network& net, const ParamVector& theta, const GeneratorSpec& gen,
                                   ConstSpan x, std::size_t y, bool with_eigen) {
  const auto tape = net.record(theta, x);
  const Vector e = link_error(gen, y, tape.output);
  SampleStats s;
  s.loss = fy_loss_label(gen, y, tape.output);
  s.fit = norm2_sq(e);
  if (!std::isfinite(s.loss) || !all_finite(e)) {
    s.grad = Vector(theta.size(), NAN);
    s.energy = NAN;
    return s;
  }
  if (with_eigen) {
    const Matrix jac = net.jacobian(theta, tape);
    s.grad = jac.multiply_transposed(e);
    const ExtremeEigs eig = sym_eigs_extreme(structure_matrix(jac));
    s.lambda_min = eig.lambda_min;
    s.lambda_max = eig.lambda_max;
  } else {
    s.grad = net.backward(theta, tape, e);
  }
  s.energy = gradient_energy(s.grad);
  return s;
}

}  // namespace detail

/// Minibatch SGD with per-step metrics. Step k's row is measured at theta_k
/// on the batch s_k used for that step.
inline TrainTrace train(const Network& net, const GeneratorSpec& gen, const LabeledData& data,
                        const SgdConfig& cfg, ParamVector theta) {
  cfg.validate();
  if (data.inputs.size() != data.labels.size()) throw InvalidInput("inputs and labels differ in count");
  if (gen.dim != net.spec().output_dim) throw InvalidInput("generator dimension differs from output_dim");
  TrainTrace trace;
  if (cfg.steps == 0) {
    trace.final_params = std::move(theta);
    return trace;
  }
  BatchSampler sampler(data.size(), cfg.batch_size, cfg.seed);
  const auto everything = all_indices(data.size());
  const double inv_b = 1.0 / static_cast<double>(cfg.batch_size);

  for (long k = 0; k < cfg.steps; ++k) {
    const auto idx = sampler.next();
    const bool eig = k % cfg.eigen_every == 0 || k == cfg.steps - 1;
    std::vector<detail::SampleStats> stats(idx.size());
    parallel_for(idx.size(), [&](std::size_t i) {
      stats[i] = detail::evaluate_sample(net, theta, gen, data.inputs[idx[i]], data.labels[idx[i]], eig);
    });

    Vector losses(idx.size()), fits(idx.size()), energies(idx.size());
    Vector grad(theta.size(), 0.0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      losses[i] = stats[i].loss;
      fits[i] = stats[i].fit;
      energies[i] = stats[i].energy;
      axpy(inv_b, stats[i].grad, grad);
    }
    MetricsRow row;
    row.step = k;
    row.batch_loss = mean(losses);
    row.risk_surrogate = mean(fits);
    row.grad_energy = mean(energies);
    if (!std::isfinite(row.batch_loss) || !all_finite(grad)) {
      throw NumericalFailure("non-finite loss at metrics row " + std::to_string(k), static_cast<double>(k));
    }
    if (eig) {
      Vector lmin(idx.size()), lmax(idx.size()), lower(idx.size()), upper(idx.size());
      bool full_rank = true;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        lmin[i] = stats[i].lambda_min;
        lmax[i] = stats[i].lambda_max;
        if (lmin[i] <= cfg.rank_tol) {
          full_rank = false;
          continue;
        }
        lower[i] = stats[i].energy / lmax[i];
        upper[i] = stats[i].energy / lmin[i];
      }
      row.lambda_min = mean(lmin);
      row.lambda_max = mean(lmax);
      if (full_rank) {
        row.lower_bound = mean(lower);
        row.upper_bound = mean(upper);
      }
    }

    double alpha = cfg.alpha;
    if (cfg.mode == SgdConfig::Mode::OptimalFromXi) alpha = optimal_step(grad, cfg.xi).value_or(0.0);
    ParamVector next = sgd_step(theta, grad, alpha);

    if (cfg.mode == SgdConfig::Mode::OptimalFromXi || cfg.measure_beta) {
      const double after = batch_loss(net, next, gen, data, idx);
      if (cfg.mode == SgdConfig::Mode::OptimalFromXi &&
          after > row.batch_loss - descent_decrement(grad, cfg.xi) + 1e-9) {
        ++trace.descent_violations;
      }
      if (cfg.measure_beta) {
        const double batch_drop = after - row.batch_loss;
        const double full_drop =
            batch_loss(net, next, gen, data, everything) - batch_loss(net, theta, gen, data, everything);
        if (batch_drop != 0.0) trace.beta.push_back(full_drop / batch_drop);
      }
    }
    trace.rows.push_back(row);
    theta = std::move(next);
  }
  trace.final_params = std::move(theta);
  return trace;
}

}  // namespace pdl

#endif  // PDL_OPTIM_HPP_
