#include "knp/index_solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "knp/rng.hpp"

namespace knp {

Vector project_ellipsoid(const Vector& z, const Vector& weights, double radius) {
  if (z.size() != weights.size()) throw ValidationError("project_ellipsoid: dimension mismatch");
  const double r2 = radius * radius;
  const double level = (weights.array() * z.array().square()).sum();
  if (level <= r2) return z;

  auto excess = [&](double mu, double* slope) {
    double val = 0.0, der = 0.0;
    for (Index j = 0; j < z.size(); ++j) {
      const double den = 1.0 + mu * weights(j);
      const double t = weights(j) * z(j) * z(j) / (den * den);
      val += t;
      der -= 2.0 * t * weights(j) / den;
    }
    if (slope) *slope = der;
    return val - r2;
  };

  double lo = 0.0;
  double hi = std::sqrt((z.array().square() / weights.array()).sum()) / radius;
  double mu = 0.0;
  for (int it = 0; it < 200; ++it) {
    double slope = 0.0;
    const double val = excess(mu, &slope);
    if (std::abs(val) <= 1e-15 * r2) break;
    if (val > 0) lo = mu;
    else hi = mu;
    double next = slope < 0 ? mu - val / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo <= 1e-16 * std::max(1.0, hi)) break;
    mu = next;
  }
  Vector x = z.array() / (1.0 + mu * weights.array());
  const double got = (weights.array() * x.array().square()).sum();
  if (got > r2) x *= radius / std::sqrt(got);
  return x;
}

IndexProblem::IndexProblem(Vector y, Vector offset, Matrix design, int hermite_order)
    : y_(std::move(y)), offset_(std::move(offset)), design_(std::move(design)), order_(hermite_order) {
  if (offset_.size() != y_.size() || design_.rows() != y_.size())
    throw ValidationError("IndexProblem: row counts differ");
  if (order_ < 0 || order_ > kMaxHermiteOrder) throw ValidationError("IndexProblem: Hermite order out of range");
}

void IndexProblem::set_ellipsoid(Vector weights, double radius) {
  if (weights.size() != design_.cols()) throw ValidationError("IndexProblem: weight size mismatch");
  if (!(radius > 0)) throw ValidationError("IndexProblem: radius must be positive");
  if ((weights.array() <= 0).any()) throw ValidationError("IndexProblem: weights must be positive");
  weights_ = std::move(weights);
  radius_ = radius;
}

Vector IndexProblem::project(const Vector& beta) const {
  return weights_ ? project_ellipsoid(beta, *weights_, radius_) : beta;
}

double IndexProblem::objective(const Vector& beta, const Vector& tau) const {
  const HermiteDistribution<double> dist(tau);
  const Vector idx = index(beta);
  double acc = 0.0;
  for (Index i = 0; i < idx.size(); ++i) {
    const double r = y_(i) - dist.cdf(idx(i));
    acc += r * r;
  }
  return acc / static_cast<double>(n());
}

double IndexProblem::objective_and_gradient(const Vector& beta, const Vector& tau, Vector& g_beta,
                                            Vector& g_tau) const {
  const HermiteDistribution<double> dist(tau);
  const Vector idx = index(beta);
  const Index nn = n();
  Vector weight(nn);  // r_i f_i
  g_tau = Vector::Zero(order_);
  Vector dF(order_);
  double acc = 0.0;
  for (Index i = 0; i < nn; ++i) {
    double F = 0.0, f = 0.0;
    dist.evaluate(idx(i), F, f, order_ > 0 ? dF.data() : nullptr);
    const double r = y_(i) - F;
    acc += r * r;
    weight(i) = r * f;
    if (order_ > 0) g_tau.noalias() += r * dF;
  }
  const double scale = -2.0 / static_cast<double>(nn);
  g_beta.noalias() = scale * (design_.transpose() * weight);
  g_tau *= scale;
  return acc / static_cast<double>(nn);
}

Matrix IndexProblem::gauss_newton(const Vector& beta, const Vector& tau) const {
  const HermiteDistribution<double> dist(tau);
  const Vector idx = index(beta);
  const Index nn = n();
  const Index p_ = p();
  Matrix jac(nn, p_ + order_);
  Vector dF(order_);
  for (Index i = 0; i < nn; ++i) {
    double F = 0.0, f = 0.0;
    dist.evaluate(idx(i), F, f, order_ > 0 ? dF.data() : nullptr);
    jac.row(i).head(p_) = f * design_.row(i);
    if (order_ > 0) jac.row(i).tail(order_) = dF.transpose();
  }
  Matrix h = Matrix::Zero(p_ + order_, p_ + order_);
  h.selfadjointView<Eigen::Lower>().rankUpdate(jac.transpose(), 2.0 / static_cast<double>(nn));
  return h.selfadjointView<Eigen::Lower>();
}

namespace {

struct Point {
  Vector x;  // [beta; tau]
  Vector g;
  double f = 0.0;
};

void evaluate(const IndexProblem& prob, Point& pt) {
  const Index p = prob.p();
  Vector gb, gt;
  pt.f = prob.objective_and_gradient(pt.x.head(p), pt.x.tail(prob.hermite_order()), gb, gt);
  pt.g.resize(pt.x.size());
  pt.g.head(p) = gb;
  pt.g.tail(prob.hermite_order()) = gt;
}

Vector project_point(const IndexProblem& prob, const Vector& x) {
  Vector out = x;
  if (prob.constrained()) out.head(prob.p()) = prob.project(x.head(prob.p()));
  return out;
}

double projected_gradient_norm(const IndexProblem& prob, const Point& pt) {
  const Vector stepped = project_point(prob, pt.x - pt.g);
  return (stepped - pt.x).lpNorm<Eigen::Infinity>();
}

// Armijo backtracking along x + t d for t = 1, 1/2, ...; every trial point
// must already be feasible.
bool line_search(const IndexProblem& prob, const Point& cur, const Vector& d, Point& trial) {
  const double slope = cur.g.dot(d);
  if (!(slope < 0)) return false;
  double t = 1.0;
  for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
    trial.x = cur.x + t * d;
    evaluate(prob, trial);
    if (std::isfinite(trial.f) && trial.f <= cur.f + 1e-4 * t * slope && trial.f < cur.f) return true;
  }
  return false;
}

// Minimizer of g'D + D'HD/2 subject to x + D lying in the constraint
// ellipsoid (beta block only). Solves (H + 2 mu C) z = H x - g for the
// multiplier mu >= 0 with z'Cz = r^2 when the unconstrained step leaves the
// ellipsoid; z'Cz is nonincreasing in mu.
Vector constrained_newton_step(const IndexProblem& prob, const Matrix& H, const Point& cur) {
  const Index p = prob.p();
  const Index dim = cur.x.size();
  const double r2 = prob.radius() * prob.radius();
  const Vector rhs = H * cur.x - cur.g;
  Vector cdiag = Vector::Zero(dim);
  cdiag.head(p) = prob.weights();

  auto solve = [&](double mu) {
    Matrix A = H;
    A.diagonal() += 2.0 * mu * cdiag;
    Eigen::LLT<Matrix> llt(A);
    return Vector(llt.solve(rhs));
  };
  auto level = [&](const Vector& z) { return (cdiag.array() * z.array().square()).sum(); };

  Vector z = solve(0.0);
  if (z.allFinite() && level(z) <= r2) return z - cur.x;

  // Bracket the multiplier, then bisect in log space.
  const double scale = std::max(H.diagonal().head(p).maxCoeff(), 1e-300) / prob.weights().minCoeff();
  double lo = 0.0, hi = scale;
  for (int k = 0; k < 200; ++k) {
    z = solve(hi);
    if (z.allFinite() && level(z) <= r2) break;
    lo = hi;
    hi *= 4.0;
  }
  for (int k = 0; k < 100; ++k) {
    const double mid = lo > 0 ? std::sqrt(lo * hi) : 0.5 * hi;
    const Vector zm = solve(mid);
    const double lv = level(zm);
    if (lv <= r2) {
      hi = mid;
      z = zm;
    } else {
      lo = mid;
    }
    if (lv <= r2 && lv >= r2 * (1.0 - 1e-10)) break;
    if (hi - lo <= 1e-14 * hi) break;
  }
  Vector zb = z;
  zb.head(p) = prob.project(z.head(p));
  return zb - cur.x;
}

// Dense projected BFGS for the ellipsoid-constrained problem. The Hessian
// model starts from the Gauss-Newton matrix and is refreshed from it when
// progress stops.
SolveResult minimize_constrained(const IndexProblem& problem, Point cur, const OptimizerOptions& options) {
  auto fresh_model = [&]() {
    Matrix H = problem.gauss_newton(cur.x.head(problem.p()), cur.x.tail(problem.hermite_order()));
    const double ridge = 1e-8 * std::max(H.diagonal().maxCoeff(), 1e-12);
    H.diagonal().array() += ridge;
    return H;
  };
  Matrix H = fresh_model();
  bool fresh = true;
  int flat_steps = 0;
  bool stalled = false;
  int it = 0;
  for (; it < options.max_iters; ++it) {
    if (!std::isfinite(cur.f)) break;
    if (projected_gradient_norm(problem, cur) < options.grad_tol) break;
    Point trial;
    Vector d = constrained_newton_step(problem, H, cur);
    bool ok = d.allFinite() && line_search(problem, cur, d, trial);
    if (!ok) {
      // Fall back to a projected-gradient step.
      const Vector dp = project_point(problem, cur.x - cur.g / std::max(1.0, H.diagonal().maxCoeff())) - cur.x;
      ok = line_search(problem, cur, dp, trial);
    }
    if (!ok) {
      if (!fresh) {
        H = fresh_model();
        fresh = true;
        continue;
      }
      stalled = true;
      break;
    }
    const Vector s = trial.x - cur.x;
    const Vector y = trial.g - cur.g;
    const Vector Hs = H * s;
    const double sHs = s.dot(Hs);
    double sy = s.dot(y);
    if (sHs > 0) {
      // Powell damping keeps H positive definite.
      Vector r = y;
      if (sy < 0.2 * sHs) {
        const double theta = 0.8 * sHs / (sHs - sy);
        r = theta * y + (1.0 - theta) * Hs;
        sy = s.dot(r);
      }
      if (sy > 0) {
        H.noalias() -= (Hs * Hs.transpose()) / sHs;
        H.noalias() += (r * r.transpose()) / sy;
        fresh = false;
      }
    }
    const double f_prev = cur.f;
    cur = std::move(trial);
    flat_steps = (f_prev - cur.f <= 1e-15 * std::max(1.0, std::abs(cur.f))) ? flat_steps + 1 : 0;
    if (flat_steps >= 10) {
      stalled = true;
      break;
    }
  }
  SolveResult res;
  res.beta = cur.x.head(problem.p());
  res.tau = cur.x.tail(problem.hermite_order());
  res.objective = cur.f;
  res.pg_norm = projected_gradient_norm(problem, cur);
  res.iterations = it;
  res.converged = std::isfinite(cur.f) &&
                  (res.pg_norm < options.grad_tol || (stalled && res.pg_norm < std::sqrt(options.grad_tol)));
  return res;
}

// Limited-memory BFGS for the unconstrained problem.
SolveResult minimize_unconstrained(const IndexProblem& problem, Point cur, const OptimizerOptions& options) {
  std::deque<std::pair<Vector, Vector>> memory;  // (s, y)
  bool stalled = false;
  int flat_steps = 0;
  int it = 0;
  for (; it < options.max_iters; ++it) {
    if (!std::isfinite(cur.f)) break;
    if (cur.g.lpNorm<Eigen::Infinity>() < options.grad_tol) break;

    Vector d = -cur.g;
    std::vector<double> alpha(memory.size());
    for (std::size_t k = memory.size(); k-- > 0;) {
      const auto& [s, yv] = memory[k];
      alpha[k] = s.dot(d) / yv.dot(s);
      d -= alpha[k] * yv;
    }
    if (!memory.empty()) {
      const auto& [s, yv] = memory.back();
      d *= s.dot(yv) / yv.squaredNorm();
    } else {
      d /= std::max(1.0, cur.g.lpNorm<Eigen::Infinity>());
    }
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const auto& [s, yv] = memory[k];
      const double b = yv.dot(d) / yv.dot(s);
      d += (alpha[k] - b) * s;
    }
    if (!(cur.g.dot(d) < 0)) {
      memory.clear();
      d = -cur.g / std::max(1.0, cur.g.lpNorm<Eigen::Infinity>());
    }

    Point trial;
    if (!line_search(problem, cur, d, trial)) {
      if (!memory.empty()) {
        memory.clear();
        continue;
      }
      stalled = true;
      break;
    }
    const Vector s = trial.x - cur.x;
    const Vector yv = trial.g - cur.g;
    if (s.dot(yv) > 1e-12 * s.norm() * yv.norm()) {
      memory.emplace_back(s, yv);
      if (static_cast<int>(memory.size()) > options.memory) memory.pop_front();
    }
    const double f_prev = cur.f;
    cur = std::move(trial);
    flat_steps = (f_prev - cur.f <= 1e-15 * std::max(1.0, std::abs(cur.f))) ? flat_steps + 1 : 0;
    if (flat_steps >= 10) {
      stalled = true;
      break;
    }
  }
  SolveResult res;
  res.beta = cur.x.head(problem.p());
  res.tau = cur.x.tail(problem.hermite_order());
  res.objective = cur.f;
  res.pg_norm = cur.g.lpNorm<Eigen::Infinity>();
  res.iterations = it;
  res.converged = std::isfinite(cur.f) &&
                  (res.pg_norm < options.grad_tol || (stalled && res.pg_norm < std::sqrt(options.grad_tol)));
  return res;
}

}  // namespace

SolveResult minimize(const IndexProblem& problem, Vector beta0, Vector tau0, const OptimizerOptions& options) {
  const Index p = problem.p();
  const int J = problem.hermite_order();
  if (beta0.size() != p || tau0.size() != J) throw ValidationError("minimize: start has wrong dimension");
  Point cur;
  cur.x.resize(p + J);
  cur.x.head(p) = beta0;
  cur.x.tail(J) = tau0;
  cur.x = project_point(problem, cur.x);
  evaluate(problem, cur);
  return problem.constrained() ? minimize_constrained(problem, std::move(cur), options)
                               : minimize_unconstrained(problem, std::move(cur), options);
}

SolveResult minimize_multistart(const IndexProblem& problem, const OptimizerOptions& options, std::uint64_t seed) {
  const Index p = problem.p();
  const int J = problem.hermite_order();
  const int starts = std::max(1, options.n_restarts);
  SolveResult best;
  bool have = false;
  int n_conv = 0;
  for (int k = 0; k < starts; ++k) {
    Vector beta0 = Vector::Zero(p);
    Vector tau0 = Vector::Zero(J);
    if (k > 0) {
      Rng rng = substream(seed, "fit-restart", static_cast<std::uint64_t>(k));
      std::uniform_real_distribution<double> unif(-0.5, 0.5);
      if (problem.constrained()) {
        // Uniform in the ellipsoid: uniform in the unit ball, then scaled.
        std::normal_distribution<double> gauss;
        Vector dir(p);
        for (Index j = 0; j < p; ++j) dir(j) = gauss(rng);
        const double radius = std::pow(std::uniform_real_distribution<double>(0.0, 1.0)(rng), 1.0 / double(p));
        dir *= radius / std::max(dir.norm(), 1e-300);
        beta0 = problem.radius() * dir.array() / problem.weights().array().sqrt();
      } else {
        for (Index j = 0; j < p; ++j) beta0(j) = unif(rng);
      }
      for (int j = 0; j < J; ++j) tau0(j) = unif(rng);
    }
    SolveResult r = minimize(problem, beta0, tau0, options);
    r.restart = k;
    n_conv += r.converged;
    const bool better = !have || (r.converged && !best.converged) ||
                        (r.converged == best.converged && r.objective < best.objective);
    if (better) {
      best = std::move(r);
      have = true;
    }
  }
  best.restarts_converged = n_conv;
  return best;
}

}  // namespace knp
