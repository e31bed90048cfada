#include <catch_amalgamated.hpp>

#include <cmath>

#include "pdl/bounds.hpp"
#include "test_support.hpp"

using namespace pdl;
using Catch::Approx;
using pdl::testing::random_interior_simplex;
using pdl::testing::random_vector;

namespace {

NetworkSpec linear_spec(std::size_t in, std::size_t out) {
  NetworkSpec s;
  s.input_dim = in;
  s.output_dim = out;
  return s;
}

std::vector<Vector> one_hot_embedding(std::size_t card_x) {
  std::vector<Vector> e(card_x, Vector(card_x, 0.0));
  for (std::size_t x = 0; x < card_x; ++x) e[x][x] = 1.0;
  return e;
}

FinitePD random_q(Rng& rng, std::size_t cx, std::size_t cy, std::size_t embed_dim) {
  Vector flat = random_interior_simplex(rng, cx * cy);
  Matrix j(cx, cy);
  for (std::size_t i = 0; i < cx * cy; ++i) j(i / cy, i % cy) = flat[i];
  std::vector<Vector> emb(cx);
  for (auto& e : emb) e = random_vector(rng, embed_dim);
  return FinitePD(std::move(j), std::move(emb));
}

// Linear model on one-hot features whose logits are log q_{Y|x}.
ParamVector truth_params(const FinitePD& q, const NetworkSpec& spec) {
  const auto zero = ParamVector::zeros(spec);
  Vector w(zero.size(), 0.0);
  for (std::size_t x = 0; x < q.card_x(); ++x) {
    const auto c = q.conditional(x);
    for (std::size_t y = 0; y < q.card_y(); ++y) w[y * q.card_x() + x] = std::log(c[y]);
  }
  return zero.with_values(w);
}

GeneratorSpec generator_by_index(int i, std::size_t d) {
  switch (i) {
    case 0: return GeneratorSpec::squared_l2(d);
    case 1: return GeneratorSpec::neg_entropy(d);
    default: return GeneratorSpec::norm_power_fn(d, 3.0, 0.8);
  }
}

}  // namespace

TEST_CASE("conditional distributions") {
  Matrix ind(2, 2);
  for (std::size_t i = 0; i < 4; ++i) ind(i / 2, i % 2) = 0.25;
  const FinitePD u(ind, one_hot_embedding(2));
  CHECK(u.conditional(0)[0] == 0.5);
  CHECK(u.conditional(1)[1] == 0.5);

  Matrix det(2, 3);
  det(0, 2) = 0.4;
  det(1, 0) = 0.6;
  const FinitePD d(det, one_hot_embedding(2));
  CHECK(d.conditional(0)[2] == 1.0);
  CHECK(d.conditional(1)[0] == 1.0);

  Matrix t(3, 3);
  const double v[9] = {.10, .05, .05, .02, .20, .08, .15, .15, .20};
  for (std::size_t i = 0; i < 9; ++i) t(i / 3, i % 3) = v[i];
  const FinitePD q(t, one_hot_embedding(3));
  for (std::size_t x = 0; x < 3; ++x) {
    const double row = v[3 * x] + v[3 * x + 1] + v[3 * x + 2];
    for (std::size_t y = 0; y < 3; ++y) CHECK(q.conditional(x)[y] == Approx(v[3 * x + y] / row).epsilon(1e-15));
  }

  Matrix z(2, 2);
  z(0, 0) = 0.5;
  z(0, 1) = 0.5;
  const FinitePD zq(z, one_hot_embedding(2));
  CHECK_THROWS_AS(zq.conditional(1), InvalidInput);
}

TEST_CASE("finite distributions reject malformed tables") {
  Matrix neg(1, 2);
  neg(0, 0) = 1.5;
  neg(0, 1) = -0.5;
  CHECK_THROWS_AS(FinitePD(neg, one_hot_embedding(1)), InvalidInput);
  Matrix half(1, 2);
  half(0, 0) = 0.5;
  CHECK_THROWS_AS(FinitePD(half, one_hot_embedding(1)), InvalidInput);
  Matrix ok(2, 2);
  ok(0, 0) = 1.0;
  CHECK_THROWS_AS(FinitePD(ok, one_hot_embedding(3)), InvalidInput);
}

TEST_CASE("empirical distributions from samples") {
  const auto e1 = empirical_from_samples({{1, 0}}, 2, 2);
  CHECK(e1.n() == 1);
  CHECK(e1.count(1, 0) == 1);
  const auto en = empirical_from_samples(std::vector<LabeledPair>(7, {0, 1}), 2, 2);
  CHECK(en.joint(one_hot_embedding(2))(0, 1) == 1.0);
  CHECK_THROWS_AS(empirical_from_samples({}, 2, 2), InvalidInput);

  Rng rng(1);
  const auto q = random_q(rng, 4, 3, 2);
  double prev = INFINITY;
  for (std::size_t n : {100u, 1000u, 10000u, 100000u}) {
    double acc = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      acc += l1_distance(q, empirical_from_samples(sample(q, n, s), 4, 3).joint(q.embeddings()));
    }
    UNSCOPED_INFO("n = " << n << ", mean L1 = " << acc / 20.0);
    CHECK(acc / 20.0 < prev);
    prev = acc / 20.0;
  }
}

TEST_CASE("risk at the true conditional is the conditional entropy") {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const std::size_t cx = 2 + rng.below(4), cy = 2 + rng.below(4);
    Matrix j(cx, cy);
    const Vector flat = random_interior_simplex(rng, cx * cy);
    for (std::size_t i = 0; i < cx * cy; ++i) j(i / cy, i % cy) = flat[i];
    const FinitePD q(j, one_hot_embedding(cx));
    const auto spec = linear_spec(cx, cy);
    const auto gen = GeneratorSpec::neg_entropy(cy);
    CHECK(risk(gen, q, Network(spec), truth_params(q, spec)) == Approx(shannon_terms(q).cond_ent).epsilon(1e-12));
  }
}

TEST_CASE("uniform predictor on two classes has risk log 2") {
  Rng rng(3);
  const auto q = random_q(rng, 5, 2, 3);
  const auto spec = make_model(ModelFamily::A, 3, 2, 4, 1);
  CHECK(risk(GeneratorSpec::neg_entropy(2), q, Network(spec), ParamVector::zeros(spec)) ==
        Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("empirical risk equals risk of the empirical joint") {
  Rng rng(4);
  const auto q = random_q(rng, 3, 2, 2);
  const auto spec = make_model(ModelFamily::A, 2, 2, 3, 1);
  const Network net(spec);
  const auto theta = init_params(spec, 1, 1.0);
  const auto gen = GeneratorSpec::neg_entropy(2);
  const auto draws = sample(q, 50, 9);
  const auto qhat = empirical_from_samples(draws, 3, 2);
  double direct = 0.0;
  for (const auto& s : draws) direct += fy_loss_label(gen, s.y, net.forward(theta, q.embedding(s.x)));
  CHECK(risk(gen, qhat, q.embeddings(), net, theta) == Approx(direct / 50.0).epsilon(1e-12));
}

TEST_CASE("risk decomposition residual is negligible") {
  Rng rng(5);
  for (int gi = 0; gi < 3; ++gi) {
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
      const std::size_t cx = 2 + rng.below(4), cy = 2 + rng.below(3);
      const auto q = random_q(rng, cx, cy, 3);
      const auto spec = make_model(ModelFamily::B, 3, cy, 4, 1 + rng.below(2));
      const auto gen = generator_by_index(gi, cy);
      worst = std::max(worst, risk_decomposition_residual(gen, q, Network(spec), init_params(spec, rng.next_u64(), 1.0)));
    }
    CHECK(worst <= (gi == 0 ? 1e-12 : 1e-9));
  }
}

TEST_CASE("deterministic labels have zero entropy term") {
  Matrix j(3, 2);
  j(0, 0) = 0.2;
  j(1, 1) = 0.5;
  j(2, 0) = 0.3;
  const FinitePD q(j, {{0.1, 0.2}, {0.3, -0.4}, {1.0, 0.0}});
  const auto spec = make_model(ModelFamily::A, 2, 2, 3, 1);
  const auto gen = GeneratorSpec::neg_entropy(2);
  CHECK(generalized_entropy_terms(gen, q).cond_ent == 0.0);
  CHECK(risk_decomposition_residual(gen, q, Network(spec), init_params(spec, 3, 1.0)) <= 1e-12);
  const auto b = risk_bounds(gen, q);
  CHECK(b.lower == 0.0);
  CHECK(b.upper == Approx(shannon_terms(q).mut_info).epsilon(1e-12));
}

TEST_CASE("risk bounds match Shannon quantities") {
  Matrix j(2, 2);
  for (std::size_t i = 0; i < 4; ++i) j(i / 2, i % 2) = 0.25;
  const FinitePD ind(j, one_hot_embedding(2));
  const auto b = risk_bounds(GeneratorSpec::neg_entropy(2), ind);
  CHECK(b.lower == Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(b.upper == Approx(std::log(2.0)).epsilon(1e-14));

  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    const auto q = random_q(rng, 4, 3, 2);
    const auto rb = risk_bounds(GeneratorSpec::neg_entropy(3), q);
    const auto sh = shannon_terms(q);
    CHECK(rb.lower == Approx(sh.cond_ent).epsilon(1e-12));
    CHECK(rb.upper == Approx(sh.cond_ent + sh.mut_info).epsilon(1e-12));
  }
}

TEST_CASE("full-support gradient matches finite differences of the risk") {
  Rng rng(7);
  const auto q = random_q(rng, 4, 3, 3);
  const auto spec = make_model(ModelFamily::A, 3, 3, 4, 1);
  const Network net(spec);
  const auto theta = init_params(spec, 2, 1.0);
  const auto gen = GeneratorSpec::neg_entropy(3);
  const Vector g = risk_gradient(gen, q, net, theta);
  Vector v = theta.values();
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double o = v[j];
    v[j] = o + 1e-6;
    const double plus = risk(gen, q, net, theta.with_values(v));
    v[j] = o - 1e-6;
    const double minus = risk(gen, q, net, theta.with_values(v));
    v[j] = o;
    CHECK(g[j] == Approx((plus - minus) / 2e-6).margin(1e-8));
  }
}

TEST_CASE("full-support descent stays inside the risk bounds") {
  Rng rng(8);
  const auto q = random_q(rng, 4, 3, 4);
  FinitePD qe(q.joint(), one_hot_embedding(4));
  const auto spec = linear_spec(4, 3);
  const Network net(spec);
  const auto gen = GeneratorSpec::neg_entropy(3);
  const auto b = risk_bounds(gen, qe);
  ParamVector theta = ParamVector::zeros(spec);
  double r = risk(gen, qe, net, theta);
  for (int k = 0; k < 20000; ++k) {
    theta = sgd_step(theta, risk_gradient(gen, qe, net, theta), 2.0);
    r = risk(gen, qe, net, theta);
    if (r < b.lower - 1e-12) break;
  }
  CHECK(r >= b.lower - 1e-12);
  CHECK(r <= b.upper + 1e-6);
  CHECK(r - b.lower <= 1e-6);
}

TEST_CASE("gamma for uniform predictors and the dual formula") {
  Rng rng(9);
  const auto q = random_q(rng, 5, 4, 3);
  const auto spec = make_model(ModelFamily::B, 3, 4, 3, 2);
  const Network net(spec);
  const auto gen = GeneratorSpec::neg_entropy(4);
  CHECK(gamma_max_loss(gen, net, ParamVector::zeros(spec), q) == Approx(std::log(4.0)).epsilon(1e-15));
  for (int t = 0; t < 50; ++t) {
    const auto theta = init_params(spec, rng.next_u64(), 0.5 + 3.0 * rng.uniform());
    CHECK(std::abs(gamma_max_loss(gen, net, theta, q) - gamma_from_pmin(net, theta, q)) <= 1e-10);
    CHECK(gamma_max_loss(gen, net, theta, q) >= std::log(4.0) - 1e-12);
  }
  const Vector ray = gamma_along_ray(gen, net, init_params(spec, 1, 1.0), q, {0.0, 1.0});
  CHECK(ray[0] == Approx(std::log(4.0)).epsilon(1e-15));
}

TEST_CASE("information loss counts output collisions") {
  Rng rng(10);
  const auto spec = linear_spec(10, 3);
  const Network net(spec);
  Matrix j(10, 3);
  for (std::size_t i = 0; i < 30; ++i) j(i / 3, i % 3) = 1.0 / 30.0;
  const FinitePD q(j, one_hot_embedding(10));
  CHECK(information_loss(net, init_params(spec, 1, 1.0), q) == 0);
  CHECK(information_loss(net, ParamVector::zeros(spec), q) == 9);

  // ignore coordinate 0 on the 2^k binary grid
  const std::size_t k = 4;
  std::vector<Vector> grid;
  for (std::size_t b = 0; b < (1u << k); ++b) {
    Vector v(k);
    for (std::size_t i = 0; i < k; ++i) v[i] = static_cast<double>((b >> i) & 1u);
    grid.push_back(v);
  }
  Matrix jg(grid.size(), 2);
  for (std::size_t x = 0; x < grid.size(); ++x) jg(x, 0) = 1.0 / static_cast<double>(grid.size());
  const FinitePD qg(jg, grid);
  const auto s2 = linear_spec(k, 2);
  Vector w = init_params(s2, 3, 1.0).values();
  w[0] = 0.0;
  w[k] = 0.0;
  CHECK(information_loss(Network(s2), ParamVector::zeros(s2).with_values(w), qg) == (1u << (k - 1)));
  CHECK_THROWS_AS(information_loss(net, ParamVector::zeros(spec), q, -1.0), InvalidInput);
}

TEST_CASE("concentration bound arithmetic") {
  auto b = gen_bound(1.0, 0, 2, 2, 10000, 0.1);
  CHECK(b.prob == Approx(3.0 * std::exp(-16.0)).epsilon(1e-14));
  CHECK(b.prob == Approx(3.38e-7).epsilon(5e-3));
  b = gen_bound(1.0, 0, 100, 10, 100, 0.1);
  CHECK_FALSE(b.valid);
  CHECK(b.prob > 0.0);
  const double f1 = gen_bound(0.7, 0, 3, 2, 400, 0.2).prob / 3.0;
  const double f2 = gen_bound(0.7, 0, 3, 2, 800, 0.2).prob / 3.0;
  CHECK(f2 == Approx(f1 * f1).epsilon(1e-12));
  CHECK_THROWS_AS(gen_bound(0.0, 0, 2, 2, 10, 0.1), InvalidInput);
  CHECK_THROWS_AS(gen_bound(1.0, 0, 2, 2, 0, 0.1), InvalidInput);
}

TEST_CASE("Monte Carlo concentration check on a small task") {
  Rng rng(11);
  const auto q = random_q(rng, 3, 2, 2);
  const auto spec = make_model(ModelFamily::A, 2, 2, 3, 1);
  const Network net(spec);
  const auto theta = init_params(spec, 4, 1.0);
  const auto gen = GeneratorSpec::neg_entropy(2);
  const double gamma = gamma_max_loss(gen, net, theta, q);
  const Vector eps{0.0, 0.05, 0.1, 0.2, 0.3, 0.5, gamma * 1.01};
  const auto r = mc_generalization_check(gen, net, theta, q, 500, 1000, eps, 77);
  CHECK(r.holds());
  CHECK(r.empirical_exceedance.front() == 1.0);
  CHECK_FALSE(r.valid.front());
  CHECK(r.empirical_exceedance.back() == 0.0);
  CHECK(r.zeta <= q.card_x() - 1);
  for (std::size_t i = 0; i < eps.size(); ++i) {
    CHECK(r.bound_values[i] == gen_bound(r.gamma, r.zeta, 3, 2, 500, eps[i]).prob);
  }
  CHECK_THROWS_AS(mc_generalization_check(gen, net, theta, q, 500, 99, eps, 77), InvalidInput);

  const auto again = mc_generalization_check(gen, net, theta, q, 500, 1000, eps, 77);
  CHECK(again.empirical_exceedance == r.empirical_exceedance);
}

TEST_CASE("L1 concentration of the empirical joint") {
  Rng rng(12);
  const auto q = random_q(rng, 3, 2, 2);
  const auto r = l1_concentration_check(q, 2000, 500, {0.05, 0.2, 0.5, 1.0}, 5);
  CHECK(r.holds());
}

TEST_CASE("regularization probe envelope") {
  const auto spec = linear_spec(3, 2);
  const Network net(spec);
  const Vector x{0.6, 0.0, 0.8};
  const auto p = reg_equivalence_probe(GeneratorSpec::squared_l2(2), net, x, {1e-3, 1e-2, 1e-1}, 50, 3);
  // R = ||W x||^2 / 2, a rank-one quadratic in theta with top eigenvalue ||x||^2 / 2
  CHECK(p.r_at_zero == 0.0);
  CHECK(p.a_hat >= 0.0);
  CHECK(p.a_hat <= p.b_hat);
  CHECK(p.b_hat <= 0.5 * norm2_sq(x) + 1e-12);
  CHECK(p.samples == 150);

  const auto deep = make_model(ModelFamily::B, 3, 4, 3, 2);
  Rng rng(13);
  for (int t = 0; t < 10; ++t) {
    const auto pe = reg_equivalence_probe(GeneratorSpec::neg_entropy(4), Network(deep), random_vector(rng, 3),
                                          {1e-3, 1e-2, 1e-1}, 20, rng.next_u64());
    CHECK(pe.r_at_zero == 0.0);
    CHECK(pe.a_hat <= pe.b_hat);
  }
  CHECK_THROWS_AS(reg_equivalence_probe(GeneratorSpec::squared_l2(2), net, x, {0.0}, 5, 1), InvalidInput);
}
