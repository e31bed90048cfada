#include <catch_amalgamated.hpp>

#include <cmath>

#include "pdl/dataio.hpp"
#include "pdl/optim.hpp"
#include "test_support.hpp"

using namespace pdl;
using Catch::Approx;
using pdl::testing::random_vector;

namespace {

Matrix random_pd(Rng& rng, std::size_t n) {
  Matrix b(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) b(i, j) = rng.uniform(-1.0, 1.0);
  Matrix h(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = i == j ? 0.1 : 0.0;
      for (std::size_t k = 0; k < n; ++k) s += b(i, k) * b(j, k);
      h(i, j) = s;
    }
  }
  return h;
}

Objective quadratic(const Matrix& h) {
  return {[h](ConstSpan t) { return 0.5 * quadratic_form(h, t); },
          [h](ConstSpan t) { return h.multiply(t); }};
}

NetworkSpec linear_spec(std::size_t in, std::size_t out) {
  NetworkSpec s;
  s.input_dim = in;
  s.output_dim = out;
  return s;
}

LabeledData labeled_noise(Rng& rng, std::size_t n, std::size_t in, std::size_t classes) {
  LabeledData d;
  for (std::size_t i = 0; i < n; ++i) {
    d.inputs.push_back(random_vector(rng, in));
    d.labels.push_back(rng.below(classes));
  }
  return d;
}

double power_iteration(const Matrix& h, int iters) {
  Vector v(h.rows(), 1.0);
  double lambda = 0.0;
  for (int i = 0; i < iters; ++i) {
    Vector w = h.multiply(v);
    lambda = norm2(w) / norm2(v);
    v = scaled(w, 1.0 / norm2(w));
  }
  return lambda;
}

}  // namespace

TEST_CASE("optimal step arithmetic") {
  const Vector g{0.3, -1.2, 2.0};
  CHECK(*optimal_step(g, NormPowerFn(2.0, 1.0)) == Approx(1.0).epsilon(1e-14));
  CHECK(*optimal_step(g, NormPowerFn(2.0, 2.0)) == Approx(0.25).epsilon(1e-14));
  CHECK(*optimal_step(Vector{0.6, 0.8}, NormPowerFn(3.0, 1.0)) == Approx(1.0).epsilon(1e-14));
  CHECK_FALSE(optimal_step(Vector{0.0, 0.0}, NormPowerFn(2.0, 1.0)).has_value());
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const NormPowerFn xi(1.1 + 3.0 * rng.uniform(), 0.1 + 3.0 * rng.uniform());
    CHECK(*optimal_step(random_vector(rng, 5), xi) > 0.0);
  }
}

TEST_CASE("sgd step examples") {
  Rng rng2(2);
  const auto theta = init_params(linear_spec(2, 2), 3, 1.0);
  const Vector g = random_vector(rng2, theta.size());
  CHECK(sgd_step(theta, g, 0.0) == theta);
  CHECK(norm2(sgd_step(theta, theta.values(), 1.0).values()) == 0.0);
  const auto two = sgd_step(sgd_step(theta, g, 0.25), g, 0.5);
  const auto one = sgd_step(theta, g, 0.75);
  CHECK(norm2(sub(two.values(), one.values())) <= 1e-15);
  const Vector before = theta.values();
  (void)sgd_step(theta, g, 1.0);
  CHECK(theta.values() == before);
  CHECK_THROWS_AS(sgd_step(theta, Vector(theta.size() + 1, 0.0), 1.0), InvalidInput);
}

TEST_CASE("descent decrement equals the exact drop on the isotropic quadratic") {
  Rng rng(3);
  const NormPowerFn xi(2.0, 1.0);
  const Matrix h = Matrix::identity(4);
  const auto g = quadratic(h);
  for (int t = 0; t < 50; ++t) {
    const Vector theta = random_vector(rng, 4, -2.0, 2.0);
    const Vector grad = g.gradient(theta);
    const double alpha = *optimal_step(grad, xi);
    Vector next = theta;
    axpy(-alpha, grad, next);
    CHECK(descent_decrement(grad, xi) == Approx(0.5 * norm2_sq(grad)).epsilon(1e-14));
    CHECK(g.value(theta) - g.value(next) == Approx(descent_decrement(grad, xi)).epsilon(1e-12));
  }
  CHECK(descent_decrement(Vector{0.0, 0.0}, xi) == 0.0);
}

TEST_CASE("descent inequality on random quadratics with valid majorants") {
  Rng rng(4);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + rng.below(8);
    const Matrix h = random_pd(rng, n);
    const double lmax = sym_eigs_extreme(h).lambda_max;
    const NormPowerFn xi(2.0, std::sqrt(lmax) * (1.0 + rng.uniform()));
    const auto g = quadratic(h);
    const Vector theta = random_vector(rng, n, -3.0, 3.0);
    const Vector grad = g.gradient(theta);
    Vector next = theta;
    axpy(-*optimal_step(grad, xi), grad, next);
    CHECK(g.value(theta) - g.value(next) >= descent_decrement(grad, xi) - 1e-10);
  }
}

TEST_CASE("majorant of the isotropic quadratic has unit fitted scale") {
  const auto g = quadratic(Matrix::identity(5));
  const auto est = estimate_majorant(g, Vector(5, 0.0), 2.0, 64, 1.0, 9);
  CHECK(est.fitted_scale == Approx(1.0).epsilon(1e-10));
  CHECK(est.xi.scale == Approx(kMajorantSafety).epsilon(1e-10));
  CHECK(est.probes == 64);
  CHECK_THROWS_AS(estimate_majorant(g, Vector(5, 0.0), 1.0, 64, 1.0, 9), InvalidInput);
}

TEST_CASE("majorant covers the Hessian of a linear least-squares model") {
  Rng rng(5);
  const auto spec = linear_spec(3, 2);
  const Network net(spec);
  const auto gen = GeneratorSpec::squared_l2(2);
  const auto data = labeled_noise(rng, 40, 3, 2);
  const auto theta = init_params(spec, 1, 1.0);
  const auto f = network_objective(net, gen, data, theta, all_indices(data.size()));
  const auto est = estimate_majorant(f, theta.values(), 2.0, 200, 1.0, 11);

  // Hessian is (mean x x^T) repeated per output row
  Matrix cov(3, 3);
  for (const auto& x : data.inputs)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) cov(i, j) += x[i] * x[j] / static_cast<double>(data.size());
  const double lmax = power_iteration(cov, 500);
  CHECK(lmax == Approx(sym_eigs_extreme(cov).lambda_max).epsilon(1e-9));
  CHECK(est.xi.scale * est.xi.scale >= lmax);

  // fresh probes stay under the inflated majorant
  Rng probe(12345);
  for (int p = 0; p < 200; ++p) {
    const Vector a = add(theta.values(), random_vector(probe, theta.size()));
    const Vector b = add(theta.values(), random_vector(probe, theta.size()));
    CHECK(bregman_gap(f, a, b) <= est.xi(sub(a, b)) + 1e-12);
  }
}

TEST_CASE("majorant estimation rejects non-finite probes") {
  Objective bad{[](ConstSpan) { return NAN; }, [](ConstSpan t) { return Vector(t.size(), 0.0); }};
  CHECK_THROWS_AS(estimate_majorant(bad, Vector(2, 0.0), 2.0, 4, 1.0, 1), NumericalFailure);
}

TEST_CASE("H-sandwich analytic cases") {
  auto s = h_sandwich_check(Matrix::identity(3), Vector{1.0, -2.0, 0.5});
  CHECK(s.ok);
  CHECK(s.lower == Approx(s.mid).epsilon(1e-14));
  CHECK(s.upper == Approx(s.mid).epsilon(1e-14));
  s = h_sandwich_check(Matrix::diagonal(Vector{1.0, 4.0}), Vector{1.0, 0.0});
  CHECK(s.ok);
  CHECK(s.mid == Approx(0.5));
  CHECK(s.lower == Approx(0.125));
  CHECK(s.upper == Approx(0.5));
  Matrix indefinite = Matrix::diagonal(Vector{1.0, -1.0});
  CHECK_THROWS_AS(h_sandwich_check(indefinite, Vector{1.0, 1.0}), InvalidInput);
}

TEST_CASE("H-sandwich holds on random positive definite quadratics") {
  Rng rng(6);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 1 + rng.below(8);
    CHECK(h_sandwich_check(random_pd(rng, n), random_vector(rng, n, -5.0, 5.0)).ok);
  }
}

TEST_CASE("sgd config validation") {
  SgdConfig cfg;
  cfg.alpha = -0.1;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg.alpha = 0.0;
  CHECK_NOTHROW(cfg.validate());
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  cfg.batch_size = 1;
  cfg.eigen_every = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInput);
  CHECK_THROWS_AS(NormPowerFn(1.0, 1.0), InvalidInput);
}

TEST_CASE("batch sampler covers each epoch without replacement") {
  BatchSampler s(12, 4, 3);
  for (int epoch = 0; epoch < 3; ++epoch) {
    std::vector<int> seen(12, 0);
    for (int b = 0; b < 3; ++b)
      for (std::size_t i : s.next()) ++seen[i];
    for (int c : seen) CHECK(c == 1);
  }
  CHECK_THROWS_AS(BatchSampler(3, 4, 1), InvalidInput);
}

TEST_CASE("zero step size leaves parameters unchanged") {
  Rng rng(7);
  const auto spec = make_model(ModelFamily::A, 3, 2, 4, 1);
  const Network net(spec);
  const auto data = labeled_noise(rng, 10, 3, 2);
  const auto theta = init_params(spec, 2, 1.0);
  SgdConfig cfg;
  cfg.alpha = 0.0;
  cfg.steps = 1;
  cfg.batch_size = 5;
  const auto trace = train(net, GeneratorSpec::neg_entropy(2), data, cfg, theta);
  CHECK(trace.rows.size() == 1);
  CHECK(trace.final_params == theta);
  REQUIRE(trace.rows[0].lambda_min.has_value());
}

TEST_CASE("exact majorant on a quadratic-equivalent task gives no descent violations") {
  Rng rng(8);
  const auto spec = linear_spec(4, 3);
  const Network net(spec);
  const auto data = labeled_noise(rng, 64, 4, 3);
  double max_sq = 0.0;
  for (const auto& x : data.inputs) max_sq = std::max(max_sq, norm2_sq(x));
  SgdConfig cfg;
  cfg.mode = SgdConfig::Mode::OptimalFromXi;
  cfg.xi = NormPowerFn(2.0, std::sqrt(max_sq));
  cfg.steps = 200;
  cfg.batch_size = 8;
  cfg.eigen_every = 10;
  cfg.seed = 4;
  const auto trace = train(net, GeneratorSpec::squared_l2(3), data, cfg, init_params(spec, 5, 1.0));
  CHECK(trace.descent_violations == 0);
  CHECK(trace.rows.size() == 200);
  for (std::size_t i = 1; i < trace.rows.size(); ++i) CHECK(trace.rows[i].step > trace.rows[i - 1].step);
}

TEST_CASE("training lowers the risk surrogate on a synthetic task") {
  SyntheticTaskSpec task;
  task.card_x = 16;
  task.card_y = 3;
  task.embed_dim = 6;
  task.conditional_sharpness = 0.0;
  task.seed = 2;
  const auto q = make_synthetic(task);
  const auto data = to_labeled_data(q, sample(q, 256, 3));
  const auto spec = make_model(ModelFamily::A, 6, 3, 12, 1);
  SgdConfig cfg;
  cfg.alpha = 0.5;
  cfg.steps = 2000;
  cfg.batch_size = 16;
  cfg.eigen_every = 100;
  cfg.seed = 1;
  const auto trace = train(Network(spec), GeneratorSpec::neg_entropy(3), data, cfg, init_params(spec, 1, 1.0));
  REQUIRE(trace.rows.size() == 2000);
  CHECK(trace.rows.back().risk_surrogate < trace.rows.front().risk_surrogate);
  for (const auto& r : trace.rows) {
    if (r.lower_bound && r.upper_bound) {
      CHECK(*r.lower_bound <= *r.upper_bound);
    }
  }
}

TEST_CASE("training is deterministic across thread counts") {
  Rng rng(9);
  const auto spec = make_model(ModelFamily::B, 3, 2, 4, 2);
  const Network net(spec);
  const auto data = labeled_noise(rng, 32, 3, 2);
  SgdConfig cfg;
  cfg.alpha = 0.1;
  cfg.steps = 20;
  cfg.batch_size = 8;
  cfg.eigen_every = 3;
  cfg.measure_beta = true;
  const auto theta = init_params(spec, 3, 1.0);
  const auto gen = GeneratorSpec::neg_entropy(2);
  setenv("PDL_THREADS", "1", 1);
  const auto a = train(net, gen, data, cfg, theta);
  setenv("PDL_THREADS", "3", 1);
  const auto b = train(net, gen, data, cfg, theta);
  unsetenv("PDL_THREADS");
  CHECK(a.final_params == b.final_params);
  CHECK(a.beta == b.beta);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].risk_surrogate == b.rows[i].risk_surrogate);
    CHECK(a.rows[i].upper_bound == b.rows[i].upper_bound);
  }
}

TEST_CASE("non-finite loss aborts training") {
  const auto spec = linear_spec(2, 2);
  LabeledData data;
  data.inputs = {{1e300, 1e300}, {1.0, 1.0}};
  data.labels = {0, 1};
  SgdConfig cfg;
  cfg.steps = 3;
  cfg.batch_size = 2;
  cfg.alpha = 1e300;
  CHECK_THROWS_AS(train(Network(spec), GeneratorSpec::squared_l2(2), data, cfg, init_params(spec, 1, 1.0)),
                  NumericalFailure);
}
