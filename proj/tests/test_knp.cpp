#include <doctest.h>

#include <random>

#include "knp/knp.hpp"

using namespace knp;

namespace {

Dataset probit_sample(Index n, Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  Vector y(n), v(n);
  Matrix w(n, d);
  for (Index i = 0; i < n; ++i) {
    v(i) = z(rng);
    for (Index j = 0; j < d; ++j) w(i, j) = U(rng);
    y(i) = v(i) + std::sin(w(i, 0)) - z(rng) > 0 ? 1.0 : 0.0;
  }
  return make_dataset(y, v, w);
}

}  // namespace

TEST_CASE("fit normalizes at w* and predicts probabilities") {
  const Dataset d = probit_sample(150, 2, 1);
  FitConfig cfg;
  cfg.J = 2;
  cfg.m = 10;
  cfg.B = 5;
  const KnpModel model = fit(d, cfg);
  CHECK(model.diagnostics.converged);
  CHECK(model.m_effective == 10);
  CHECK(model.constraint_value() <= 25.0 * (1 + 1e-9));
  CHECK(predict_g(model, model.w_star_raw) == 0.0);
  CHECK(model.w_star_raw.isApprox(d.w.colwise().mean().transpose()));
  const Vector p = predict_p(model, d.v, d.w);
  CHECK(p.minCoeff() >= 0.0);
  CHECK(p.maxCoeff() <= 1.0);
  // In-sample criterion reproduces the stored objective.
  CHECK((d.y - p).squaredNorm() / d.size() == doctest::Approx(model.objective).epsilon(1e-10));
}

TEST_CASE("user-supplied normalization point") {
  const Dataset d = probit_sample(100, 1, 2);
  FitConfig cfg;
  cfg.w_star_policy = WStarPolicy::kUserSupplied;
  cfg.w_star = Vector::Constant(1, 0.7);
  cfg.m = 5;
  const KnpModel model = fit(d, cfg);
  CHECK(predict_g(model, cfg.w_star) == 0.0);
  cfg.w_star = Vector::Zero(2);
  CHECK_THROWS_AS(fit(d, cfg), ValidationError);
}

TEST_CASE("objective and gradient helpers agree with finite differences") {
  const Dataset d = probit_sample(20, 2, 3);
  FitConfig cfg;
  const PreparedSample s = prepare_sample(d, cfg);
  const auto t = truncate(s.gram, 5);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  Vector zeta(5), tau(3);
  for (int i = 0; i < 5; ++i) zeta(i) = z(rng);
  for (int i = 0; i < 3; ++i) tau(i) = 0.3 * z(rng);
  const HermiteDistribution<double> dist(tau);
  const ObjectiveGradient g = objective_grad(s.data, t.basis, zeta, dist);
  const double h = 1e-6;
  for (int i = 0; i < 5; ++i) {
    Vector zp = zeta, zm = zeta;
    zp(i) += h;
    zm(i) -= h;
    const double fd = (objective(s.data, t.basis, zp, dist) - objective(s.data, t.basis, zm, dist)) / (2 * h);
    CHECK(g.zeta(i) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("m above the effective rank") {
  const Dataset d = probit_sample(80, 1, 5);
  FitConfig cfg;
  const PreparedSample s = prepare_sample(d, cfg);
  const Index rank = s.gram.effective_rank();
  REQUIRE(rank < 81);
  cfg.m = rank + 1;
  try {
    fit_prepared(s, cfg);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("effective rank " + std::to_string(rank)) != std::string::npos);
  }
  cfg.m = 81;  // n + 1: untruncated, clamped to the rank
  const KnpModel full = fit_prepared(s, cfg);
  CHECK(full.m_effective == rank);
  cfg.m = rank;
  const KnpModel at_rank = fit_prepared(s, cfg);
  CHECK(full.objective == doctest::Approx(at_rank.objective).epsilon(1e-12));
  cfg.m = 82;
  CHECK_THROWS_AS(fit_prepared(s, cfg), ValidationError);
}

TEST_CASE("config validation") {
  const Dataset d = probit_sample(50, 1, 6);
  FitConfig cfg;
  cfg.B = -1;
  CHECK_THROWS_AS(fit(d, cfg), ValidationError);
  cfg = FitConfig{};
  cfg.J = 13;
  CHECK_THROWS_AS(fit(d, cfg), ValidationError);
  cfg = FitConfig{};
  cfg.sigma = 0;
  CHECK_THROWS_AS(fit(d, cfg), ValidationError);
  cfg = FitConfig{};
  cfg.m = 0;
  CHECK_THROWS_AS(fit(d, cfg), ValidationError);
}

TEST_CASE("truncated fit respects the suboptimality bound") {
  const Dataset d = probit_sample(60, 2, 7);
  FitConfig cfg;
  cfg.B = 3;
  cfg.J = 1;
  cfg.m = 61;
  const PreparedSample s = prepare_sample(d, cfg);
  const KnpModel full = fit_prepared(s, cfg);
  for (Index m : {1, 3, 8}) {
    cfg.m = m;
    const KnpModel pc = fit_prepared(s, cfg);
    const PcBoundReport r = check_pc_bound(pc, full);
    CHECK(r.holds);
    CHECK(r.residual_eigenvalue == doctest::Approx(s.gram.eigenvalues()(m)));
  }
}

TEST_CASE("fits are deterministic") {
  const Dataset d = probit_sample(120, 1, 8);
  FitConfig cfg;
  cfg.J = 3;
  cfg.seed = 17;
  const KnpModel a = fit(d, cfg);
  const KnpModel b = fit(d, cfg);
  CHECK(a.delta == b.delta);
  CHECK(a.dist.tau() == b.dist.tau());
}

TEST_CASE("density supremum of the standard normal") {
  CHECK(density_sup(HermiteDistribution<double>()) == doctest::Approx(normal_pdf(0.0)).epsilon(1e-12));
}
