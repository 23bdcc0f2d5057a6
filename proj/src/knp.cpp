#include "knp/knp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace knp {

void FitConfig::validate(Index n, Index d_w) const {
  if (!(B > 0) || !std::isfinite(B)) throw ValidationError("fit config: B must be positive and finite");
  if (J < 0 || J > kMaxHermiteOrder)
    throw ValidationError("fit config: J must lie in [0, " + std::to_string(kMaxHermiteOrder) + "]");
  if (m < 1 || m > n + 1)
    throw ValidationError("fit config: m = " + std::to_string(m) + " outside [1, n+1 = " + std::to_string(n + 1) + "]");
  if (!(sigma > 0) || !std::isfinite(sigma)) throw ValidationError("fit config: sigma must be positive");
  if (w_star_policy == WStarPolicy::kUserSupplied && w_star.size() != d_w)
    throw ValidationError("fit config: user-supplied w* has dimension " + std::to_string(w_star.size()) +
                          ", data has " + std::to_string(d_w));
  if (optimizer.max_iters < 1 || optimizer.n_restarts < 1 || !(optimizer.grad_tol > 0))
    throw ValidationError("fit config: invalid optimizer settings");
}

double KnpModel::constraint_value() const {
  return (zeta.array().square() / eigenvalues.array()).sum();
}

void finalize_model(KnpModel& model) {
  const Index n1 = model.centers.rows();
  model.kernel_at_w_star.resize(n1);
  for (Index j = 0; j < n1; ++j)
    model.kernel_at_w_star(j) = model.kernel.from_sq_dist((model.centers.row(j) - model.centers.row(0)).squaredNorm());
}

PreparedSample prepare_sample(const Dataset& data, const FitConfig& cfg) {
  validate_for_fit(data);
  cfg.validate(data.size(), data.dim());
  auto [std_data, stdz] = standardize(data);
  Vector w_star_raw = cfg.w_star_policy == WStarPolicy::kUserSupplied ? cfg.w_star : stdz.mean;
  Vector w_star = stdz.apply(w_star_raw);
  if (cfg.w_star_policy == WStarPolicy::kZeroAfterCentering) w_star.setZero();
  GramSystem<double> gram = build_gram(KernelSpec<double>(cfg.sigma), w_star, std_data.w);
  return PreparedSample{std::move(std_data), std::move(stdz), std::move(w_star_raw), std::move(w_star),
                        std::move(gram)};
}

namespace {

// Rows 1..n of the basis minus row 0.
Matrix differenced(const Matrix& basis) {
  return basis.bottomRows(basis.rows() - 1).rowwise() - basis.row(0);
}

}  // namespace

KnpModel fit_prepared(const PreparedSample& sample, const FitConfig& cfg) {
  const Dataset& data = sample.data;
  const Index n = data.size();
  cfg.validate(n, data.dim());
  if (std::abs(sample.gram.kernel().bandwidth() - cfg.sigma) > 0)
    throw ValidationError("fit: prepared sample was built with a different bandwidth");

  const Index rank = sample.gram.effective_rank();
  Index m = cfg.m;
  if (m > rank) {
    if (m != n + 1) {
      std::ostringstream msg;
      msg << "fit: m = " << m << " exceeds the effective rank " << rank << " of the gram matrix";
      throw ValidationError(msg.str());
    }
    m = rank;  // m = n+1 requests the untruncated problem
  }
  const Truncation<double> trunc = truncate(sample.gram, m);
  const Index me = trunc.effective_m;

  // Internal scaling: beta = zeta / sqrt(n) keeps design entries O(1).
  const double root_n = std::sqrt(static_cast<double>(n));
  const Matrix basis = trunc.basis.leftCols(me);
  const Vector lambda = trunc.values.head(me);
  Matrix design = root_n * differenced(basis);
  IndexProblem problem(data.y, data.v, std::move(design), cfg.J);
  problem.set_ellipsoid(static_cast<double>(n) * lambda.cwiseInverse(), cfg.B);

  const SolveResult res = minimize_multistart(problem, cfg.optimizer, cfg.seed);
  if (!res.converged) {
    std::ostringstream msg;
    msg << "fit: optimizer did not converge from any of " << cfg.optimizer.n_restarts
        << " starts (best objective " << res.objective << ", projected gradient " << res.pg_norm << ", "
        << res.iterations << " iterations)";
    throw NumericalError(msg.str());
  }

  KnpModel model;
  model.kernel = sample.gram.kernel();
  model.standardization = sample.standardization;
  model.centers = sample.gram.centers();
  model.w_star_raw = sample.w_star_raw;
  model.zeta = root_n * res.beta;
  model.eigenvalues = lambda;
  model.delta = basis * model.zeta.cwiseQuotient(lambda);
  model.dist = HermiteDistribution<double>(res.tau);
  model.B = cfg.B;
  model.m_requested = cfg.m;
  model.m_effective = me;
  model.truncation_residual = me < sample.gram.size() ? std::max(sample.gram.eigenvalues()(me), 0.0) : 0.0;
  model.objective = res.objective;
  model.diagnostics = FitDiagnostics{res.iterations, res.restart, cfg.optimizer.n_restarts, res.restarts_converged,
                                     res.converged, res.pg_norm};
  finalize_model(model);
  return model;
}

KnpModel fit(const Dataset& data, const FitConfig& cfg) { return fit_prepared(prepare_sample(data, cfg), cfg); }

double objective(const Dataset& data, const Matrix& basis, const Vector& zeta, const HermiteDistribution<double>& dist) {
  if (basis.rows() != data.size() + 1 || basis.cols() != zeta.size())
    throw ValidationError("objective: basis must be (n+1) x m and match zeta");
  const IndexProblem problem(data.y, data.v, differenced(basis), dist.order());
  return problem.objective(zeta, dist.tau());
}

ObjectiveGradient objective_grad(const Dataset& data, const Matrix& basis, const Vector& zeta,
                                 const HermiteDistribution<double>& dist) {
  if (basis.rows() != data.size() + 1 || basis.cols() != zeta.size())
    throw ValidationError("objective_grad: basis must be (n+1) x m and match zeta");
  const IndexProblem problem(data.y, data.v, differenced(basis), dist.order());
  ObjectiveGradient g;
  problem.objective_and_gradient(zeta, dist.tau(), g.zeta, g.tau);
  return g;
}

namespace {

double g_standardized(const KnpModel& model, const Vector& s) {
  double acc = 0.0;
  for (Index j = 0; j < model.centers.rows(); ++j) {
    const double k = model.kernel.from_sq_dist((model.centers.row(j) - s.transpose()).squaredNorm());
    acc += model.delta(j) * (k - model.kernel_at_w_star(j));
  }
  return acc;
}

}  // namespace

double predict_g(const KnpModel& model, const Vector& w) {
  if (w.size() != model.dim())
    throw ValidationError("predict_g: point has dimension " + std::to_string(w.size()) + ", model expects " +
                          std::to_string(model.dim()));
  return g_standardized(model, model.standardization.apply(w));
}

Vector predict_g(const KnpModel& model, const Matrix& w_rows) {
  if (w_rows.cols() != model.dim()) throw ValidationError("predict_g: dimension mismatch");
  const Matrix s = model.standardization.apply_rows(w_rows);
  Vector out(s.rows());
  for (Index i = 0; i < s.rows(); ++i) out(i) = g_standardized(model, s.row(i).transpose());
  return out;
}

double predict_p(const KnpModel& model, double v, const Vector& w) { return model.dist.cdf(v + predict_g(model, w)); }

Vector predict_p(const KnpModel& model, const Vector& v, const Matrix& w_rows) {
  if (v.size() != w_rows.rows()) throw ValidationError("predict_p: v and w row counts differ");
  const Vector g = predict_g(model, w_rows);
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) out(i) = model.dist.cdf(v(i) + g(i));
  return out;
}

double density_sup(const HermiteDistribution<double>& dist) {
  double best = 0.0;
  constexpr int kPoints = 4001;
  for (int i = 0; i < kPoints; ++i) {
    const double u = -10.0 + 20.0 * i / (kPoints - 1);
    best = std::max(best, dist.density(u));
  }
  return best;
}

PcBoundReport check_pc_bound(const KnpModel& model, double reference_objective, double density_bound) {
  PcBoundReport r;
  r.pc_objective = model.objective;
  r.reference_objective = reference_objective;
  r.density_sup = density_bound;
  r.B = model.B;
  r.residual_eigenvalue = model.truncation_residual;
  r.allowance = 4.0 * density_bound * model.B * std::sqrt(std::max(model.truncation_residual, 0.0));
  r.slack = reference_objective + r.allowance - r.pc_objective;
  r.holds = r.slack >= 0.0;
  return r;
}

PcBoundReport check_pc_bound(const KnpModel& model, const KnpModel& reference) {
  const double sup = std::max(density_sup(model.dist), density_sup(reference.dist));
  return check_pc_bound(model, reference.objective, sup);
}

}  // namespace knp
