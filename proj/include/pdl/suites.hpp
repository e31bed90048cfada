#ifndef PDL_SUITES_HPP_
#define PDL_SUITES_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pdl/bounds.hpp"
#include "pdl/dataio.hpp"
#include "pdl/diagnostics.hpp"
#include "pdl/generators.hpp"
#include "pdl/netcore.hpp"
#include "pdl/optim.hpp"

namespace pdl {

struct SuiteOptions {
  bool inject_fault = false;  // perturb the conjugate inside the conjugate suite
  std::uint64_t seed = 20240611;
};

struct SuiteResult {
  std::string name;
  bool pass = true;
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst = 0.0;  // largest residual seen, in the suite's own units
  double seconds = 0.0;
  std::string detail;
};

struct Suite {
  std::string name;
  std::string summary;
  std::function<SuiteResult(const SuiteOptions&)> run;
};

namespace detail {

/// Counts checks and failures for one suite and keeps the first few messages.
class Tally {
 public:
  explicit Tally(std::string name) { r_.name = std::move(name); }

  void check(bool ok, double residual = 0.0, std::string_view what = {}) {
    ++r_.checked;
    if (std::isfinite(residual)) r_.worst = std::max(r_.worst, residual);
    else r_.worst = residual;
    if (!ok) {
      ++r_.failed;
      if (r_.failed <= 3 && !what.empty()) note(what);
    }
  }

  void note(std::string_view s) {
    if (!r_.detail.empty()) r_.detail += "; ";
    r_.detail += s;
  }

  SuiteResult finish() {
    r_.pass = r_.failed == 0 && r_.checked > 0;
    return r_;
  }

 private:
  SuiteResult r_;
};

inline std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

inline Vector uniform_vector(Rng& rng, std::size_t n, double lo, double hi) {
  Vector v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline GeneratorSpec pick_generator(Rng& rng, std::size_t dim) {
  switch (rng.below(3)) {
    case 0: return GeneratorSpec::squared_l2(dim);
    case 1: return GeneratorSpec::neg_entropy(dim);
    default: return GeneratorSpec::norm_power_fn(dim, rng.uniform(1.2, 4.0), rng.uniform(0.3, 2.0));
  }
}

/// A point in the interior of dom(Phi).
inline Vector domain_point(Rng& rng, const GeneratorSpec& gen) {
  if (gen.variant == GeneratorSpec::Variant::NegEntropySimplex) {
    Vector p = dirichlet(rng, gen.dim, 2.0);
    for (double& v : p) v = 0.9 * v + 0.1 / static_cast<double>(gen.dim);
    return p;
  }
  return uniform_vector(rng, gen.dim, -2.0, 2.0);
}

inline Matrix random_pd(Rng& rng, std::size_t n) {
  Matrix b(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) b(i, j) = rng.uniform(-1.0, 1.0);
  Matrix h(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = i == j ? 0.05 : 0.0;
      for (std::size_t k = 0; k < n; ++k) s += b(i, k) * b(j, k);
      h(i, j) = s;
    }
  }
  return h;
}

inline NetworkSpec smooth_network(Rng& rng) {
  NetworkSpec s;
  s.input_dim = 1 + rng.below(4);
  s.output_dim = 2 + rng.below(4);
  const std::size_t w = 2 + rng.below(5);
  const Activation act = rng.below(2) == 0 ? Activation::Tanh : Activation::Softplus;
  s.stem = {{w, act, false}};
  s.blocks = {{w, act, rng.below(2) == 0}};
  s.repeat = 1 + rng.below(2);
  return s;
}

}  // namespace detail

/// Fenchel-Young duality, norm-power reciprocity and Euler's identity.
inline SuiteResult suite_conjugate(const SuiteOptions& opt) {
  detail::Tally t("conjugate");
  Rng rng(opt.seed);
  Rng fault(opt.seed ^ 0xfa017ULL);
  for (int i = 0; i < 1000; ++i) {
    const auto gen = detail::pick_generator(rng, 2 + rng.below(7));
    const Vector mu = detail::domain_point(rng, gen);
    const Vector nu = grad_phi(gen, mu);
    double conj = eval_conjugate(gen, nu);
    if (opt.inject_fault) conj += fault.uniform(1e-6, 1e-5);
    const double res = std::abs(eval_phi(gen, mu) + conj - dot(mu, nu));
    t.check(res <= 1e-9, res, "duality residual " + detail::fmt(res));
  }
  for (int i = 0; i < 1000; ++i) {
    const NormPowerFn np(rng.uniform(1.05, 8.0), rng.uniform(0.05, 5.0));
    const NormPowerFn c = conjugate_norm_power(np);
    const double recip = std::abs(1.0 / np.order + 1.0 / c.order - 1.0);
    const double scale = std::abs(np.scale * c.scale - 1.0);
    t.check(recip <= 1e-9 && scale <= 1e-9, std::max(recip, scale), "reciprocity residual " + detail::fmt(recip));
  }
  for (int i = 0; i < 1000; ++i) {
    const NormPowerFn np(rng.uniform(1.05, 8.0), rng.uniform(0.05, 3.0));
    const Vector mu = detail::uniform_vector(rng, 1 + rng.below(8), -2.0, 2.0);
    const double rel = euler_residual(np, mu) / std::max(1e-300, np.order * np(mu));
    t.check(rel <= 1e-9, rel, "Euler residual " + detail::fmt(rel));
  }
  return t.finish();
}

/// Cross-entropy minus entropy equals the Fenchel-Young loss of negative entropy.
inline SuiteResult suite_softmax_ce(const SuiteOptions& opt) {
  detail::Tally t("softmax_ce");
  Rng rng(opt.seed + 1);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t d = 2 + rng.below(9);
    const Vector q = dirichlet(rng, d, 1.0);
    const Vector z = detail::uniform_vector(rng, d, -6.0, 6.0);
    const Vector p = softmax(z);
    double ce = 0.0, ent = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      if (q[k] == 0.0) continue;
      ce -= q[k] * std::log(p[k]);
      ent -= q[k] * std::log(q[k]);
    }
    const double res = std::abs(ce - ent - fy_loss(GeneratorSpec::neg_entropy(d), q, z));
    t.check(res <= 1e-8, res, "residual " + detail::fmt(res));
  }
  return t.finish();
}

/// Reverse-mode gradients against central differences on smooth networks.
inline SuiteResult suite_gradients(const SuiteOptions& opt) {
  detail::Tally t("gradients");
  Rng rng(opt.seed + 2);
  for (int i = 0; i < 200; ++i) {
    const auto spec = detail::smooth_network(rng);
    const auto theta = init_params(spec, rng.next_u64(), 1.0);
    const Vector x = detail::uniform_vector(rng, spec.input_dim, -1.5, 1.5);
    const std::size_t y = rng.below(spec.output_dim);
    const auto gen = detail::pick_generator(rng, spec.output_dim);
    const Vector g = loss_grad(spec, theta, gen, x, y);
    const Vector fd = fd_grad_oracle(spec, theta, gen, x, y, 1e-6);
    const double rel = norm2(sub(g, fd)) / std::max(norm2(fd), 1e-12);
    t.check(rel <= 1e-5, rel, "relative error " + detail::fmt(rel));
  }
  return t.finish();
}

/// Risk equals generalized conditional entropy plus the expected fitting gap.
inline SuiteResult suite_decomposition(const SuiteOptions& opt) {
  detail::Tally t("decomposition");
  Rng rng(opt.seed + 3);
  const char* names[] = {"squared_l2", "neg_entropy", "norm_power"};
  for (int gi = 0; gi < 3; ++gi) {
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      SyntheticTaskSpec task;
      task.card_x = 2 + rng.below(6);
      task.card_y = 2 + rng.below(4);
      task.embed_dim = 1 + rng.below(4);
      task.conditional_sharpness = rng.below(4) == 0 ? 0.0 : rng.uniform(0.2, 5.0);
      task.seed = rng.next_u64();
      const auto q = make_synthetic(task);
      const auto fam = static_cast<ModelFamily>(rng.below(4));
      const auto spec = make_model(fam, task.embed_dim, task.card_y, 2 + rng.below(4), 1 + rng.below(2));
      GeneratorSpec gen = gi == 0   ? GeneratorSpec::squared_l2(task.card_y)
                          : gi == 1 ? GeneratorSpec::neg_entropy(task.card_y)
                                    : GeneratorSpec::norm_power_fn(task.card_y, rng.uniform(1.2, 4.0),
                                                                   rng.uniform(0.3, 2.0));
      const double res =
          risk_decomposition_residual(gen, q, Network(spec), init_params(spec, rng.next_u64(), rng.uniform(0.5, 2.0)));
      worst = std::max(worst, res);
      t.check(res <= 1e-9, res, std::string(names[gi]) + " residual " + detail::fmt(res));
    }
    t.note(std::string(names[gi]) + " worst " + detail::fmt(worst));
  }
  return t.finish();
}

/// Psi*(grad G) <= G - G* <= psi*(grad G) for positive definite quadratics.
inline SuiteResult suite_prop3(const SuiteOptions& opt) {
  detail::Tally t("prop3");
  Rng rng(opt.seed + 4);
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = 1 + rng.below(8);
    const auto s = h_sandwich_check(detail::random_pd(rng, n), detail::uniform_vector(rng, n, -5.0, 5.0), 1e-9);
    t.check(s.ok, std::max(s.lower - s.mid, s.mid - s.upper),
            "lower " + detail::fmt(s.lower) + " mid " + detail::fmt(s.mid) + " upper " + detail::fmt(s.upper));
  }
  return t.finish();
}

/// Steps of gradient descent with alpha = 1/lambda_max until ||grad|| <= eps,
/// on G = sum lambda_j theta_j^2 / 2 with a geometric spectrum and
/// theta_j = lambda_j^(-1/2), for which ||grad||^2 decays like 1/T.
inline std::vector<long> quadratic_iteration_counts(const Vector& eps, long max_steps = 50'000'000) {
  constexpr std::size_t kLevels = 48;
  Vector lambda(kLevels), theta(kLevels);
  for (std::size_t j = 0; j < kLevels; ++j) {
    lambda[j] = std::ldexp(1.0, -static_cast<int>(j));
    theta[j] = 1.0 / std::sqrt(lambda[j]);
  }
  std::vector<long> out;
  long step = 0;
  for (double e : eps) {
    for (;;) {
      double gg = 0.0;
      for (std::size_t j = 0; j < kLevels; ++j) gg += lambda[j] * lambda[j] * theta[j] * theta[j];
      if (gg <= e * e || step >= max_steps) break;
      for (std::size_t j = 0; j < kLevels; ++j) theta[j] -= lambda[j] * theta[j];
      ++step;
    }
    out.push_back(step);
  }
  return out;
}

/// Descent inequality with the optimal step and the iteration-count trend.
inline SuiteResult suite_descent(const SuiteOptions& opt) {
  detail::Tally t("descent");
  Rng rng(opt.seed + 5);
  std::size_t violations = 0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 1 + rng.below(8);
    const Matrix h = detail::random_pd(rng, n);
    const NormPowerFn xi(2.0, std::sqrt(sym_eigs_extreme(h).lambda_max));
    Vector theta = detail::uniform_vector(rng, n, -3.0, 3.0);
    for (int k = 0; k < 50; ++k) {
      const Vector g = h.multiply(theta);
      const auto alpha = optimal_step(g, xi);
      if (!alpha) break;
      Vector next = theta;
      axpy(-*alpha, g, next);
      const double before = 0.5 * quadratic_form(h, theta);
      const double after = 0.5 * quadratic_form(h, next);
      const double slack = after - (before - descent_decrement(g, xi));
      const bool ok = slack <= 1e-9;
      violations += ok ? 0 : 1;
      t.check(ok, std::max(0.0, slack), "descent slack " + detail::fmt(slack));
      theta = std::move(next);
    }
  }

  // Same inequality through the training loop: linear least squares on a
  // fixed dataset, with xi^2 = max ||x||^2 bounding every batch Hessian.
  {
    NetworkSpec spec;
    spec.input_dim = 4;
    spec.output_dim = 3;
    LabeledData data;
    for (int i = 0; i < 96; ++i) {
      data.inputs.push_back(detail::uniform_vector(rng, 4, -1.0, 1.0));
      data.labels.push_back(rng.below(3));
    }
    double max_sq = 0.0;
    for (const auto& x : data.inputs) max_sq = std::max(max_sq, norm2_sq(x));
    SgdConfig cfg;
    cfg.mode = SgdConfig::Mode::OptimalFromXi;
    cfg.xi = NormPowerFn(2.0, std::sqrt(max_sq));
    cfg.steps = 300;
    cfg.batch_size = 16;
    cfg.eigen_every = 100;
    cfg.seed = opt.seed;
    const auto trace = train(Network(spec), GeneratorSpec::squared_l2(3), data, cfg, init_params(spec, opt.seed, 1.0));
    t.check(trace.descent_violations == 0, static_cast<double>(trace.descent_violations),
            "training-loop descent violations " + std::to_string(trace.descent_violations));
    violations += static_cast<std::size_t>(trace.descent_violations);
  }
  t.note("violations " + std::to_string(violations));

  const Vector eps{1e-1, 1e-2, 1e-3};
  const auto steps = quadratic_iteration_counts(eps);
  double lo = INFINITY, hi = 0.0;
  std::string counts;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double scaled_t = static_cast<double>(steps[i]) * eps[i] * eps[i];
    lo = std::min(lo, scaled_t);
    hi = std::max(hi, scaled_t);
    counts += (i ? "/" : "") + std::to_string(steps[i]);
  }
  const double spread = hi / lo;
  t.check(spread <= 4.0 && lo > 0.0, spread, "T eps^2 spread " + detail::fmt(spread));
  t.note("T(eps) = " + counts + ", T eps^2 spread " + detail::fmt(spread));
  return t.finish();
}

/// Eigenvalue sandwich of the fitting error, plus rank-deficiency rejection.
inline SuiteResult suite_prop5(const SuiteOptions& opt) {
  detail::Tally t("prop5");
  Rng rng(opt.seed + 6);
  std::size_t skipped = 0;
  for (int i = 0; i < 500; ++i) {
    const std::size_t out = 2 + rng.below(7);
    NetworkSpec spec;
    spec.input_dim = 2 + rng.below(4);
    spec.output_dim = out;
    const std::size_t width = 2 + rng.below(6);
    const Activation act = rng.below(2) == 0 ? Activation::Tanh : Activation::Softplus;
    spec.stem = {{width, act, false}};
    if (rng.below(2) == 0) spec.blocks = {{width, act, true}};
    const Network net(spec);
    if (net.param_count() < 4 * out) {
      --i;
      continue;
    }
    const auto theta = init_params(spec, rng.next_u64(), rng.uniform(0.5, 2.0));
    const Vector x = detail::uniform_vector(rng, spec.input_dim, -1.0, 1.0);
    const std::size_t y = rng.below(out);
    const auto gen = detail::pick_generator(rng, out);
    const auto tape = net.record(theta, x);
    const Matrix jac = net.jacobian(theta, tape);
    const auto eig = sym_eigs_extreme(structure_matrix(jac));
    const Vector e = link_error(gen, y, tape.output);
    const Vector g = jac.multiply_transposed(e);
    if (eig.lambda_min <= kRankTol) {
      bool rejected = false;
      try {
        sample_bounds(g, eig.lambda_min, eig.lambda_max);
      } catch (const RankDeficient&) {
        rejected = true;
      }
      t.check(rejected, 0.0, "rank-deficient instance accepted");
      ++skipped;
      continue;
    }
    const auto b = sample_bounds(g, eig.lambda_min, eig.lambda_max);
    const double fit = norm2_sq(e);
    const double slack = std::max(b.lower - fit, fit - b.upper);
    t.check(b.lower - 1e-9 <= fit && fit <= b.upper + 1e-9 * std::max(1.0, b.upper), std::max(0.0, slack),
            "sandwich slack " + detail::fmt(slack));
  }

  // With every parameter at zero the Jacobian vanishes: A_x = 0 must be rejected.
  for (int i = 0; i < 20; ++i) {
    const auto spec = make_model(static_cast<ModelFamily>(rng.below(4)), 3, 2 + rng.below(7), 4, 1);
    const Network net(spec);
    const auto zero = ParamVector::zeros(spec);
    const Vector x = detail::uniform_vector(rng, 3, -1.0, 1.0);
    const auto tape = net.record(zero, x);
    const Matrix jac = net.jacobian(zero, tape);
    const auto eig = sym_eigs_extreme(structure_matrix(jac));
    bool rejected = false;
    try {
      sample_bounds(jac.multiply_transposed(link_error(GeneratorSpec::neg_entropy(spec.output_dim), 0, tape.output)),
                    eig.lambda_min, eig.lambda_max);
    } catch (const RankDeficient&) {
      rejected = true;
    }
    t.check(rejected, 0.0, "zero-parameter structure matrix accepted");
  }
  t.note(std::to_string(skipped) + " random instances were rank deficient");
  return t.finish();
}

struct ReplicationSettings {
  SyntheticTaskSpec task{64, 3, 16, 0.0, 1};
  std::size_t samples = 3200;
  std::size_t width = 32;
  double alpha = 0.5;
  double init_scale = 1.0;
  std::size_t batch = 64;
  long steps = 2000;
  long eigen_every = 50;  // one epoch of 3200 / 64
  std::size_t window = 20;
  std::uint64_t seed = 3;
};

struct ReplicationOutcome {
  TrainTrace trace;
  std::size_t logged = 0;
  bool sandwich = true;
  std::optional<double> pearson_upper;
  std::optional<double> pearson_lower;
  double energy_ratio = 0.0;  // final logged / max logged gradient energy
  double lambda_min_init = 0.0;
  double lambda_min_final = 0.0;
};

/// Model A (k = 1) trained by minibatch SGD on a synthetic 3-class task.
inline ReplicationOutcome run_replication(const ReplicationSettings& s) {
  const auto q = make_synthetic(s.task);
  const auto data = to_labeled_data(q, sample(q, s.samples, s.seed));
  const auto spec = make_model(ModelFamily::A, s.task.embed_dim, s.task.card_y, s.width, 1);
  SgdConfig cfg;
  cfg.alpha = s.alpha;
  cfg.steps = s.steps;
  cfg.batch_size = s.batch;
  cfg.eigen_every = s.eigen_every;
  cfg.seed = s.seed + 1;
  ReplicationOutcome o;
  o.trace = train(Network(spec), GeneratorSpec::neg_entropy(s.task.card_y), data, cfg,
                  init_params(spec, s.seed + 2, s.init_scale));
  double max_energy = 0.0, last_energy = 0.0;
  bool first = true;
  for (const auto& r : o.trace.rows) {
    if (!r.lambda_min) continue;
    ++o.logged;
    if (first) o.lambda_min_init = *r.lambda_min;
    first = false;
    o.lambda_min_final = *r.lambda_min;
    max_energy = std::max(max_energy, r.grad_energy);
    last_energy = r.grad_energy;
    if (!r.lower_bound || !r.upper_bound) {
      o.sandwich = false;
      continue;
    }
    if (!(*r.lower_bound - 1e-9 <= r.risk_surrogate &&
          r.risk_surrogate <= *r.upper_bound + 1e-9 * std::max(1.0, *r.upper_bound))) {
      o.sandwich = false;
    }
  }
  o.energy_ratio = max_energy > 0.0 ? last_energy / max_energy : 1.0;
  const auto c = bound_correlations(o.trace.rows, s.window);
  if (!c.upper.empty()) {
    o.pearson_upper = c.upper.back();
    o.pearson_lower = c.lower.back();
  }
  return o;
}

/// Desk-scale training run: sandwich, bound tracking, energy decay, lambda_min growth.
inline SuiteResult suite_replication(const SuiteOptions&) {
  detail::Tally t("replication");
  const auto o = run_replication({});
  t.check(o.sandwich, 0.0, "sandwich violated at a logged step");
  const double pu = o.pearson_upper.value_or(NAN), pl = o.pearson_lower.value_or(NAN);
  t.check(pu >= 0.9, pu, "final pearson(risk, upper) " + detail::fmt(pu));
  t.check(pl >= 0.9, pl, "final pearson(risk, lower) " + detail::fmt(pl));
  t.check(o.energy_ratio < 0.1, o.energy_ratio, "final/max gradient energy " + detail::fmt(o.energy_ratio));
  t.check(o.lambda_min_final >= o.lambda_min_init, o.lambda_min_init - o.lambda_min_final,
          "lambda_min fell from " + detail::fmt(o.lambda_min_init) + " to " + detail::fmt(o.lambda_min_final));
  t.note(std::to_string(o.logged) + " logged rows, pearson upper " + detail::fmt(pu) + " lower " + detail::fmt(pl) +
         ", energy ratio " + detail::fmt(o.energy_ratio) + ", lambda_min " + detail::fmt(o.lambda_min_init) + " -> " +
         detail::fmt(o.lambda_min_final));
  return t.finish();
}

/// Full-support gradient descent on an empirical distribution stays inside
/// [H(Y|X), H(Y|X) + I(X;Y)] of that distribution.
inline SuiteResult suite_prop6(const SuiteOptions& opt) {
  detail::Tally t("prop6");
  const SyntheticTaskSpec task{8, 3, 6, 1.0, opt.seed + 7};
  const auto q = make_synthetic(task);
  const auto draws = sample(q, 400, opt.seed + 8);
  const FinitePD qhat = empirical_from_samples(draws, task.card_x, task.card_y).joint(q.embeddings());
  const auto spec = make_model(ModelFamily::B, task.embed_dim, task.card_y, 16, 2);
  const Network net(spec);
  const auto gen = GeneratorSpec::neg_entropy(task.card_y);
  const auto b = risk_bounds(gen, qhat);
  ParamVector theta = init_params(spec, opt.seed + 9, 1.0);
  double r = risk(gen, qhat, net, theta);
  double lowest = r;
  for (int k = 0; k < 4000; ++k) {
    theta = sgd_step(theta, risk_gradient(gen, qhat, net, theta), 0.5);
    r = risk(gen, qhat, net, theta);
    lowest = std::min(lowest, r);
    t.check(r >= b.lower - 1e-12, b.lower - r, "risk " + detail::fmt(r) + " below lower bound at step " +
                                                   std::to_string(k));
  }
  t.check(r >= b.lower - 1e-6 && r <= b.upper + 1e-6, r - b.lower,
          "final risk " + detail::fmt(r) + " outside [" + detail::fmt(b.lower) + ", " + detail::fmt(b.upper) + "]");
  t.note("lower " + detail::fmt(b.lower) + ", upper " + detail::fmt(b.upper) + ", final risk " + detail::fmt(r));
  return t.finish();
}

/// Monte Carlo exceedance of |L(q) - L(qhat_n)| against the concentration bound.
inline SuiteResult suite_concentration(const SuiteOptions& opt) {
  detail::Tally t("concentration");
  const double closed = gen_bound(1.0, 0, 2, 2, 10000, 0.1).prob;
  const double rel = std::abs(closed - 3.0 * std::exp(-16.0)) / (3.0 * std::exp(-16.0));
  t.check(rel <= 1e-12, rel, "closed form mismatch " + detail::fmt(rel));

  const auto q = make_synthetic({3, 2, 2, 1.0, opt.seed + 10});
  const auto spec = make_model(ModelFamily::A, 2, 2, 4, 1);
  const Network net(spec);
  const auto theta = init_params(spec, opt.seed + 11, 1.0);
  const auto gen = GeneratorSpec::neg_entropy(2);
  const double gamma = gamma_max_loss(gen, net, theta, q);
  Vector eps;
  for (int i = 0; i <= 24; ++i) eps.push_back(gamma * i / 16.0);
  const auto rep = mc_generalization_check(gen, net, theta, q, 500, 1000, eps, opt.seed + 12);
  std::size_t valid = 0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!rep.valid[i]) continue;
    ++valid;
    const double allowed = rep.bound_values[i] + binomial_slack(rep.bound_values[i], rep.trials);
    t.check(rep.empirical_exceedance[i] <= allowed, rep.empirical_exceedance[i] - allowed,
            "eps " + detail::fmt(eps[i]) + " exceedance " + detail::fmt(rep.empirical_exceedance[i]));
  }
  t.check(valid > 0, 0.0, "no valid epsilon in the grid");
  t.note("gamma " + detail::fmt(rep.gamma) + ", zeta " + std::to_string(rep.zeta) + ", valid from " +
         detail::fmt(rep.valid_from) + ", " + std::to_string(valid) + " valid eps");
  return t.finish();
}

/// R(0) = 0, ordered probe envelope, and gamma at zero parameters.
inline SuiteResult suite_probes(const SuiteOptions& opt) {
  detail::Tally t("probes");
  Rng rng(opt.seed + 13);
  const Vector radii{1e-3, 1e-2, 1e-1};
  for (int i = 0; i < 40; ++i) {
    const std::size_t out = 2 + rng.below(7);
    const auto spec = make_model(static_cast<ModelFamily>(rng.below(4)), 3, out, 4, 1 + rng.below(2));
    const Network net(spec);
    const auto gen = detail::pick_generator(rng, out);
    const Vector x = detail::uniform_vector(rng, 3, -1.0, 1.0);
    for (double radius : radii) {
      const auto p = reg_equivalence_probe(gen, net, x, {radius}, 10, rng.next_u64());
      t.check(p.r_at_zero == 0.0, std::abs(p.r_at_zero), "R(0) = " + detail::fmt(p.r_at_zero));
      t.check(p.a_hat <= p.b_hat, p.a_hat - p.b_hat, "aHat > bHat at radius " + detail::fmt(radius));
    }
    const auto q = make_synthetic({2 + rng.below(6), out, 3, 1.0, rng.next_u64()});
    const double g0 = gamma_max_loss(GeneratorSpec::neg_entropy(out), net, ParamVector::zeros(spec), q);
    const double err = std::abs(g0 - std::log(static_cast<double>(out)));
    t.check(err <= 1e-12, err, "gamma(0) off log|Y| by " + detail::fmt(err));
  }
  return t.finish();
}

inline const std::vector<Suite>& all_suites() {
  static const std::vector<Suite> suites = {
      {"conjugate", "Fenchel-Young duality, norm-power reciprocity, Euler identity", suite_conjugate},
      {"softmax_ce", "softmax cross-entropy as a Fenchel-Young loss", suite_softmax_ce},
      {"gradients", "reverse mode vs central differences", suite_gradients},
      {"decomposition", "risk decomposition identity", suite_decomposition},
      {"prop3", "H-smooth / H-convex sandwich on quadratics", suite_prop3},
      {"descent", "optimal-step descent inequality and iteration trend", suite_descent},
      {"prop5", "structure-matrix eigenvalue sandwich", suite_prop5},
      {"replication", "desk-scale training run with bound tracking", suite_replication},
      {"prop6", "risk bounds under full-support descent", suite_prop6},
      {"concentration", "Monte Carlo generalization bound", suite_concentration},
      {"probes", "regularization probes and gamma at zero", suite_probes},
  };
  return suites;
}

/// Runs one suite and records its wall time. Exceptions count as a failure.
inline SuiteResult run_suite(const Suite& s, const SuiteOptions& opt) {
  const auto start = std::chrono::steady_clock::now();
  SuiteResult r;
  try {
    r = s.run(opt);
  } catch (const std::exception& e) {
    r.name = s.name;
    r.pass = false;
    r.failed = 1;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace pdl

#endif  // PDL_SUITES_HPP_
