#include <doctest.h>

#include <random>

#include "knp/index_solver.hpp"

using namespace knp;

TEST_CASE("ellipsoid projection") {
  Vector c(3);
  c << 1.0, 4.0, 0.25;
  Vector inside(3);
  inside << 0.1, 0.1, 0.1;
  CHECK(project_ellipsoid(inside, c, 1.0) == inside);

  std::mt19937_64 rng(9);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 50; ++trial) {
    Vector x(3);
    for (int i = 0; i < 3; ++i) x(i) = 5.0 * z(rng);
    const Vector p = project_ellipsoid(x, c, 1.0);
    const double level = (c.array() * p.array().square()).sum();
    if ((c.array() * x.array().square()).sum() <= 1.0) {
      CHECK(p == x);
      continue;
    }
    CHECK(level <= 1.0 + 1e-12);
    CHECK(level == doctest::Approx(1.0).epsilon(1e-9));
    // KKT: x - p is parallel to the outward normal C p.
    const Vector normal = c.cwiseProduct(p);
    const Vector r = x - p;
    const double mu = r.dot(normal) / normal.squaredNorm();
    CHECK(mu > 0.0);
    CHECK((r - mu * normal).norm() < 1e-8 * (1.0 + r.norm()));
  }
}

namespace {

IndexProblem random_problem(std::mt19937_64& rng, Index n, Index p, int J) {
  std::normal_distribution<double> z;
  Vector y(n), off(n);
  Matrix D(n, p);
  for (Index i = 0; i < n; ++i) {
    off(i) = z(rng);
    for (Index j = 0; j < p; ++j) D(i, j) = z(rng);
    y(i) = off(i) + 0.5 * D(i, 0) + z(rng) > 0 ? 1.0 : 0.0;
  }
  return IndexProblem(y, off, D, J);
}

}  // namespace

TEST_CASE("objective gradient matches central differences") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 20; ++trial) {
    const int J = trial % 5;
    const IndexProblem prob = random_problem(rng, 20, 4, J);
    Vector beta(4), tau(J);
    for (int i = 0; i < 4; ++i) beta(i) = 0.5 * z(rng);
    for (int r = 0; r < J; ++r) tau(r) = 0.5 * z(rng);
    Vector gb, gt;
    prob.objective_and_gradient(beta, tau, gb, gt);
    const double h = 1e-6;
    for (int i = 0; i < 4; ++i) {
      Vector bp = beta, bm = beta;
      bp(i) += h;
      bm(i) -= h;
      const double fd = (prob.objective(bp, tau) - prob.objective(bm, tau)) / (2 * h);
      CHECK(gb(i) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
    for (int r = 0; r < J; ++r) {
      Vector tp = tau, tm = tau;
      tp(r) += h;
      tm(r) -= h;
      const double fd = (prob.objective(beta, tp) - prob.objective(beta, tm)) / (2 * h);
      CHECK(gt(r) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("gauss-newton matrix is symmetric positive semidefinite") {
  std::mt19937_64 rng(6);
  const IndexProblem prob = random_problem(rng, 30, 3, 2);
  const Matrix H = prob.gauss_newton(Vector::Constant(3, 0.2), Vector::Constant(2, 0.1));
  CHECK(H.rows() == 5);
  CHECK((H - H.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(H).eigenvalues().minCoeff() > -1e-12);
}

TEST_CASE("unconstrained solve reaches a stationary point") {
  std::mt19937_64 rng(7);
  const IndexProblem prob = random_problem(rng, 200, 2, 0);
  const SolveResult r = minimize_multistart(prob, OptimizerOptions{}, 1);
  CHECK(r.converged);
  Vector gb, gt;
  prob.objective_and_gradient(r.beta, r.tau, gb, gt);
  CHECK(gb.lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("constrained solve stays feasible and is stationary") {
  std::mt19937_64 rng(8);
  IndexProblem prob = random_problem(rng, 200, 3, 2);
  Vector c(3);
  c << 10.0, 40.0, 90.0;
  prob.set_ellipsoid(c, 0.5);
  const SolveResult r = minimize_multistart(prob, OptimizerOptions{}, 2);
  CHECK(r.converged);
  CHECK((c.array() * r.beta.array().square()).sum() <= 0.25 * (1 + 1e-10));
  CHECK(r.pg_norm < 1e-6);
  // No feasible perturbation improves on the solution.
  std::normal_distribution<double> z;
  for (int k = 0; k < 20; ++k) {
    Vector d(3);
    for (int i = 0; i < 3; ++i) d(i) = 1e-3 * z(rng);
    const Vector b = prob.project(r.beta + d);
    CHECK(prob.objective(b, r.tau) >= r.objective - 1e-10);
  }
}

TEST_CASE("multistart is deterministic") {
  std::mt19937_64 rng(9);
  IndexProblem prob = random_problem(rng, 100, 3, 3);
  prob.set_ellipsoid(Vector::Constant(3, 1.0), 2.0);
  const SolveResult a = minimize_multistart(prob, OptimizerOptions{}, 42);
  const SolveResult b = minimize_multistart(prob, OptimizerOptions{}, 42);
  CHECK(a.beta == b.beta);
  CHECK(a.tau == b.tau);
  CHECK(a.objective == b.objective);
}

TEST_CASE("dimension errors") {
  std::mt19937_64 rng(10);
  const IndexProblem prob = random_problem(rng, 20, 2, 1);
  CHECK_THROWS_AS(minimize(prob, Vector::Zero(3), Vector::Zero(1), OptimizerOptions{}), ValidationError);
}
