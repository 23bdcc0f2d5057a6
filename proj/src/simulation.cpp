#include "knp/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <optional>
#include <cmath>
#include <limits>
#include <ostream>

#include "knp/index_solver.hpp"
#include "knp/parallel.hpp"
#include "knp/rng.hpp"

namespace knp {

SimDesign SimDesign::parse(const std::string& name) {
  SimDesign d;
  if (name.size() < 2) throw ValidationError("unknown design '" + name + "'");
  const std::string g = name.substr(0, name.size() - 1);
  const char e = name.back();
  if (g == "I") d.g = GSpec::I;
  else if (g == "II") d.g = GSpec::II;
  else if (g == "III") d.g = GSpec::III;
  else if (g == "IV") d.g = GSpec::IV;
  else throw ValidationError("unknown design '" + name + "' (expected I..IV followed by A or B)");
  if (e == 'A') d.err = ErrSpec::A;
  else if (e == 'B') d.err = ErrSpec::B;
  else throw ValidationError("unknown design '" + name + "' (error spec must be A or B)");
  return d;
}

std::string SimDesign::name() const {
  static const char* gs[] = {"I", "II", "III", "IV"};
  return std::string(gs[static_cast<int>(g)]) + (err == ErrSpec::A ? "A" : "B");
}

void SimDesign::validate() const {
  if (ntrain < 10) throw ValidationError("simulate: ntrain must be at least 10");
  if (ntest < 1) throw ValidationError("simulate: ntest must be positive");
  if (nsim < 1) throw ValidationError("simulate: nsim must be positive");
}

double true_g(const SimDesign& design, const Vector& w) {
  auto bumpy = [](double x) { return x * x / 2.0 + std::sin(std::numbers::pi * x); };
  switch (design.g) {
    case GSpec::I: return w(0);
    case GSpec::II: return bumpy(w(0));
    case GSpec::III: {
      double s = 0.0;
      for (Index j = 0; j < 10; ++j) s += kDesignBeta[static_cast<std::size_t>(j)] * w(j);
      return s;
    }
    case GSpec::IV: {
      double s = 0.0;
      for (Index j = 0; j < 10; ++j) s += kDesignBeta[static_cast<std::size_t>(j)] * bumpy(w(j));
      return s;
    }
  }
  return 0.0;
}

double true_F(const SimDesign& design, double u) {
  if (design.err == ErrSpec::A) return normal_cdf(u);
  return 0.25 * normal_cdf(u + 3.0) + 0.75 * normal_cdf(u - 2.0);
}

SimSample generate(const SimDesign& design, Split split, int rep) {
  const Index n = split == Split::Train ? design.ntrain : design.ntest;
  const Index d = design.d_w();
  Rng rng = substream(design.seed, "sim-" + design.name() + (split == Split::Train ? "-train" : "-test"),
                      static_cast<std::uint64_t>(rep));
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const bool wide = d == 1;
  Vector y(n), v(n), g(n), p(n);
  Matrix w(n, d);
  for (Index i = 0; i < n; ++i) {
    v(i) = z(rng);
    for (Index j = 0; j < d; ++j) w(i, j) = wide ? -2.0 + 4.0 * u01(rng) : u01(rng);
    double eps = 0.0;
    if (design.err == ErrSpec::A) {
      eps = z(rng);
    } else {
      const bool left = u01(rng) < 0.25;
      eps = (left ? -3.0 : 2.0) + z(rng);
    }
    g(i) = true_g(design, w.row(i).transpose());
    p(i) = true_F(design, v(i) + g(i));
    y(i) = v(i) + g(i) - eps > 0.0 ? 1.0 : 0.0;
  }
  return SimSample{make_dataset(std::move(y), std::move(v), std::move(w)), std::move(g), std::move(p)};
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Probit: return "Probit";
    case Method::KPB: return "KPB";
    case Method::SNP: return "SNP";
    case Method::P2PB: return "P2PB";
    case Method::P3PB: return "P3PB";
    case Method::P4PB: return "P4PB";
    case Method::KNP: return "KNP";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : kAllMethods)
    if (method_name(m) == name) return m;
  throw ValidationError("unknown method '" + name + "'");
}

Metrics score(const Vector& g_hat, const Vector& g_true, const Vector& p_hat, const Vector& p_true) {
  if (g_hat.size() != g_true.size() || p_hat.size() != p_true.size() || g_hat.size() == 0)
    throw ValidationError("score: prediction and truth sizes differ");
  Metrics m;
  const Vector eg = g_hat - g_true;
  const Vector ep = p_hat - p_true;
  m.rmse_g = std::sqrt(eg.squaredNorm() / static_cast<double>(eg.size()));
  m.mad_g = eg.cwiseAbs().mean();
  m.rmse_p = std::sqrt(ep.squaredNorm() / static_cast<double>(ep.size()));
  m.mad_p = ep.cwiseAbs().mean();
  return m;
}

SimOptions SimOptions::defaults(const SimDesign& design) {
  SimOptions o;
  o.base.w_star_policy = WStarPolicy::kUserSupplied;
  o.base.w_star = Vector::Zero(design.d_w());
  o.base.seed = design.seed;
  if (design.d_w() == 1) {
    // One covariate: the gram matrix has effective rank near 15, so larger m
    // adds nothing.
    for (double B : {10.0, 30.0})
      for (int J : {0, 2, 4}) o.grid.push_back({B, J, 12});
  } else {
    for (double B : {3.0, 10.0, 30.0})
      for (int J : {0, 2, 4})
        for (Index m : {25, 50}) o.grid.push_back({B, J, m});
  }
  return o;
}

namespace {

// Monomials of total degree 1..k in d variables, as exponent vectors.
std::vector<std::vector<int>> monomials(Index d, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> e(static_cast<std::size_t>(d), 0);
  // Recursive enumeration of exponent vectors with sum == deg.
  std::function<void(Index, int)> rec = [&](Index pos, int left) {
    if (pos == d - 1) {
      e[static_cast<std::size_t>(pos)] = left;
      out.push_back(e);
      return;
    }
    for (int a = left; a >= 0; --a) {
      e[static_cast<std::size_t>(pos)] = a;
      rec(pos + 1, left - a);
    }
  };
  for (int deg = 1; deg <= k; ++deg) rec(0, deg);
  return out;
}

// Linear-in-parameters index over monomials phi(w) of the rescaled
// deviation from w* (so phi(w*) = 0). With J > 0 the error is squared-Hermite
// and the v coefficient is fixed at 1. With J = 0 the fit is an ordinary
// probit Phi(a + b v + c' phi(w)) and g is reported on the v scale as
// c' phi(w) / b.
struct SeriesModel {
  Vector w_star;
  Vector scale;
  std::vector<std::vector<int>> terms;
  bool free_probit = false;
  double intercept = 0.0;
  double v_coef = 1.0;
  Vector beta;
  HermiteDistribution<double> dist;

  Matrix features(const Matrix& w) const {
    Matrix z = (w.rowwise() - w_star.transpose()).array().rowwise() / scale.transpose().array();
    Matrix out(w.rows(), static_cast<Index>(terms.size()));
    for (std::size_t t = 0; t < terms.size(); ++t) {
      Vector col = Vector::Ones(w.rows());
      for (Index j = 0; j < z.cols(); ++j)
        for (int a = 0; a < terms[t][static_cast<std::size_t>(j)]; ++a) col.array() *= z.col(j).array();
      out.col(static_cast<Index>(t)) = col;
    }
    return out;
  }
  Vector g(const Matrix& w) const { return features(w) * beta / v_coef; }
  Vector p(const Vector& v, const Matrix& w) const {
    const Vector idx = (intercept + v_coef * v.array()).matrix() + features(w) * beta;
    Vector out(idx.size());
    for (Index i = 0; i < idx.size(); ++i) out(i) = dist.cdf(idx(i));
    return out;
  }
};

// phi(x) / Phi(x), with the asymptotic series far in the lower tail.
double inverse_mills(double x) {
  if (x > -35.0) return normal_pdf(x) / normal_cdf(x);
  const double r = 1.0 / (x * x);
  return -x / (1.0 - r + 3.0 * r * r - 15.0 * r * r * r);
}

double probit_loglik(const Matrix& X, const Vector& y, const Vector& b) {
  const Vector eta = X * b;
  double ll = 0.0;
  for (Index i = 0; i < eta.size(); ++i) {
    const double s = y(i) > 0.5 ? eta(i) : -eta(i);
    // log Phi(s) = log phi(s) - log(phi(s) / Phi(s))
    ll += -0.5 * s * s - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(inverse_mills(s));
  }
  return ll;
}

// Probit maximum likelihood by Fisher scoring with step halving. Under
// (quasi-)separation the likelihood has no maximizer; the iterate at the
// iteration limit is returned, as standard packages do.
Vector probit_mle(const Matrix& X, const Vector& y) {
  const Index n = X.rows(), p = X.cols();
  Vector b = Vector::Zero(p);
  double ll = probit_loglik(X, y, b);
  for (int iter = 0; iter < 200; ++iter) {
    const Vector eta = X * b;
    Vector score(n), weight(n);
    for (Index i = 0; i < n; ++i) {
      const double up = inverse_mills(eta(i)), down = inverse_mills(-eta(i));
      score(i) = y(i) > 0.5 ? up : -down;
      weight(i) = up * down;
    }
    const Vector grad = X.transpose() * score;
    Matrix info = X.transpose() * weight.asDiagonal() * X;
    info.diagonal().array() += 1e-10 * std::max(1.0, info.diagonal().maxCoeff());
    const Vector step = info.ldlt().solve(grad);
    if (!step.allFinite()) throw NumericalError("probit fit: singular information matrix");
    double t = 1.0, next = -std::numeric_limits<double>::infinity();
    for (int h = 0; h < 40; ++h, t *= 0.5) {
      next = probit_loglik(X, y, b + t * step);
      if (next >= ll) break;
    }
    if (!(next >= ll)) break;
    b += t * step;
    const double change = next - ll;
    ll = next;
    if (grad.cwiseAbs().maxCoeff() < 1e-9 * static_cast<double>(n) || change < 1e-12 * (1.0 + std::abs(ll))) break;
  }
  return b;
}

SeriesModel fit_series(const Dataset& data, const Vector& w_star, int degree, int J, const OptimizerOptions& opt,
                       std::uint64_t seed) {
  SeriesModel m;
  m.w_star = w_star;
  m.scale = Vector::Ones(data.dim());
  if (data.size() > 1) {
    const Vector mean = data.w.colwise().mean().transpose();
    for (Index j = 0; j < data.dim(); ++j) {
      const double sd = std::sqrt((data.w.col(j).array() - mean(j)).square().sum() / (data.size() - 1));
      if (sd > 0) m.scale(j) = sd;
    }
  }
  m.terms = monomials(data.dim(), degree);
  m.free_probit = J == 0;
  const Matrix phi = m.features(data.w);
  if (!m.free_probit) {
    IndexProblem problem(data.y, data.v, phi, J);
    const SolveResult res = minimize_multistart(problem, opt, seed);
    if (!res.converged)
      throw NumericalError("series fit did not converge (projected gradient " + std::to_string(res.pg_norm) + ")");
    m.beta = res.beta;
    m.dist = HermiteDistribution<double>(res.tau);
    return m;
  }
  Matrix design(data.size(), phi.cols() + 2);
  design.col(0).setOnes();
  design.col(1) = data.v;
  design.rightCols(phi.cols()) = phi;
  const Vector b = probit_mle(design, data.y);
  if (!(b(1) > 0)) throw NumericalError("probit fit: nonpositive v coefficient");
  m.intercept = b(0);
  m.v_coef = b(1);
  m.beta = b.tail(phi.cols());
  return m;
}

struct Prepared {
  const SimSample& train;
  const SimSample& test;
  const SimOptions& options;
  std::uint64_t cv_seed;
};

MethodOutcome series_outcome(Method method, const Prepared& p) {
  MethodOutcome out;
  out.method = method;
  const Vector& w_star = p.options.base.w_star;
  int degree = 1, J = 0;
  if (method == Method::P2PB) degree = 2;
  if (method == Method::P3PB) degree = 3;
  if (method == Method::P4PB) degree = 4;
  const std::uint64_t seed = p.options.base.seed;
  if (method == Method::SNP) {
    // Hermite order by k-fold CV over the grid's positive orders.
    std::vector<int> orders;
    for (const auto& t : p.options.grid)
      if (t.J > 0 && std::find(orders.begin(), orders.end(), t.J) == orders.end()) orders.push_back(t.J);
    std::sort(orders.begin(), orders.end());
    if (orders.empty()) orders.push_back(2);
    const auto folds = make_folds(p.train.data.size(), p.options.folds, p.cv_seed);
    double best = std::numeric_limits<double>::infinity();
    for (int order : orders) {
      double total = 0.0;
      for (const auto& held : folds) {
        std::vector<bool> mask(static_cast<std::size_t>(p.train.data.size()), false);
        for (Index i : held) mask[static_cast<std::size_t>(i)] = true;
        std::vector<Index> rows;
        for (Index i = 0; i < p.train.data.size(); ++i)
          if (!mask[static_cast<std::size_t>(i)]) rows.push_back(i);
        const Dataset tr = p.train.data.subset(rows);
        const Dataset te = p.train.data.subset(held);
        try {
          const SeriesModel m = fit_series(tr, w_star, 1, order, p.options.base.optimizer, seed);
          total += (te.y - m.p(te.v, te.w)).squaredNorm() / static_cast<double>(te.size());
        } catch (const NumericalError&) {
          total = std::numeric_limits<double>::infinity();
          break;
        }
      }
      if (total < best) {
        best = total;
        J = order;
      }
    }
    if (!std::isfinite(best)) {
      out.error = "SNP: every Hermite order failed in cross-validation";
      return out;
    }
  }
  try {
    const SeriesModel m = fit_series(p.train.data, w_star, degree, J, p.options.base.optimizer, seed);
    out.metrics = score(m.g(p.test.data.w), p.test.g_true, m.p(p.test.data.v, p.test.data.w), p.test.p_true);
    out.tuning = TuningTriple{0.0, J, 0};
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

// KNP and KPB share one cross-validation pass over the union of their grids.
std::vector<MethodOutcome> kernel_outcomes(const std::vector<Method>& wanted, const Prepared& p) {
  std::vector<MethodOutcome> outs;
  std::vector<TuningTriple> grid;
  for (const auto& t : p.options.grid) {
    const bool use = (t.J == 0 && std::count(wanted.begin(), wanted.end(), Method::KPB)) ||
                     std::count(wanted.begin(), wanted.end(), Method::KNP);
    if (use) grid.push_back(t);
  }
  CvPlan plan;
  plan.folds = p.options.folds;
  plan.grid = grid;
  plan.seed = p.cv_seed;
  std::optional<CvResult> cv;
  std::string cv_error;
  try {
    cv = cross_validate(p.train.data, plan, p.options.base, 1);
  } catch (const std::exception& e) {
    cv_error = e.what();
  }
  std::optional<PreparedSample> prepared;
  for (Method method : wanted) {
    MethodOutcome out;
    out.method = method;
    if (!cv) {
      out.error = cv_error;
      outs.push_back(out);
      continue;
    }
    const CvRow* best = select_best(cv->table, [&](const TuningTriple& t) { return method == Method::KNP || t.J == 0; });
    if (!best) {
      out.error = method_name(method) + ": every tuning triple failed in cross-validation";
      outs.push_back(out);
      continue;
    }
    try {
      FitConfig cfg = p.options.base;
      cfg.B = best->triple.B;
      cfg.J = best->triple.J;
      cfg.m = best->triple.m;
      if (!prepared) prepared = prepare_sample(p.train.data, cfg);
      const KnpModel model = fit_prepared(*prepared, cfg);
      if (p.options.on_kernel_fit) p.options.on_kernel_fit(method, model);
      out.metrics = score(predict_g(model, p.test.data.w), p.test.g_true,
                          predict_p(model, p.test.data.v, p.test.data.w), p.test.p_true);
      out.tuning = best->triple;
      out.ok = true;
    } catch (const std::exception& e) {
      out.error = e.what();
    }
    outs.push_back(out);
  }
  return outs;
}

}  // namespace

MethodOutcome run_baseline(Method method, const SimSample& train, const SimSample& test, const SimOptions& options,
                           std::uint64_t cv_seed) {
  const Prepared p{train, test, options, cv_seed};
  if (method == Method::KNP || method == Method::KPB) return kernel_outcomes({method}, p).front();
  return series_outcome(method, p);
}

std::vector<MethodOutcome> run_replication(const SimDesign& design, int rep, const SimOptions& options) {
  if (rep < 0 || rep >= design.nsim) throw ValidationError("simulate: replication index out of range");
  const SimSample train = generate(design, Split::Train, rep);
  const SimSample test = generate(design, Split::Test, rep);
  const std::uint64_t cv_seed = substream(design.seed, "sim-cv-" + design.name(), static_cast<std::uint64_t>(rep))();
  const Prepared p{train, test, options, cv_seed};

  std::vector<Method> kernel;
  for (Method m : options.methods)
    if (m == Method::KNP || m == Method::KPB) kernel.push_back(m);
  const std::vector<MethodOutcome> kernel_out = kernel.empty() ? std::vector<MethodOutcome>{} : kernel_outcomes(kernel, p);

  std::vector<MethodOutcome> outs;
  for (Method m : options.methods) {
    if (m == Method::KNP || m == Method::KPB) {
      for (const auto& o : kernel_out)
        if (o.method == m) outs.push_back(o);
    } else {
      outs.push_back(series_outcome(m, p));
    }
  }
  return outs;
}

SimTable replicate_table(const SimDesign& design, const SimOptions& options) {
  design.validate();
  if (options.methods.empty()) throw ValidationError("simulate: no methods requested");
  if (options.base.w_star.size() != design.d_w())
    throw ValidationError("simulate: normalization point must have dimension " + std::to_string(design.d_w()));
  const auto start = std::chrono::steady_clock::now();
  SimTable table;
  table.design = design;
  table.methods = options.methods;
  table.reps.resize(static_cast<std::size_t>(design.nsim));
  parallel_for(static_cast<std::size_t>(design.nsim), options.threads,
               [&](std::size_t r) { table.reps[r] = run_replication(design, static_cast<int>(r), options); });

  const std::size_t M = options.methods.size();
  table.means.assign(M, Metrics{});
  table.failures.assign(M, 0);
  for (std::size_t k = 0; k < M; ++k) {
    int ok = 0;
    Metrics sum;
    for (const auto& rep : table.reps) {
      const MethodOutcome& o = rep[k];
      if (!o.ok) {
        ++table.failures[k];
        continue;
      }
      ++ok;
      sum.rmse_g += o.metrics.rmse_g;
      sum.mad_g += o.metrics.mad_g;
      sum.rmse_p += o.metrics.rmse_p;
      sum.mad_p += o.metrics.mad_p;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    table.means[k] = ok == 0 ? Metrics{nan, nan, nan, nan}
                             : Metrics{sum.rmse_g / ok, sum.mad_g / ok, sum.rmse_p / ok, sum.mad_p / ok};
  }
  table.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return table;
}

void write_table_csv(std::ostream& out, const std::vector<SimTable>& tables) {
  if (tables.empty()) return;
  const auto old_precision = out.precision(6);
  out << "design,metric";
  for (Method m : tables.front().methods) out << ',' << method_name(m);
  out << '\n';
  const char* names[] = {"RMSE_g", "MAD_g", "RMSE_p", "MAD_p"};
  for (const auto& t : tables) {
    for (int k = 0; k < 4; ++k) {
      out << t.design.name() << ',' << names[k];
      for (const auto& m : t.means) {
        const double vals[] = {m.rmse_g, m.mad_g, m.rmse_p, m.mad_p};
        out << ',' << vals[k];
      }
      out << '\n';
    }
  }
  out.precision(old_precision);
}

void write_reps_csv(std::ostream& out, const SimTable& table) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << "design,rep,method,ok,rmse_g,mad_g,rmse_p,mad_p,B,J,m\n";
  for (std::size_t r = 0; r < table.reps.size(); ++r) {
    for (const auto& o : table.reps[r]) {
      out << table.design.name() << ',' << r << ',' << method_name(o.method) << ',' << (o.ok ? 1 : 0) << ','
          << o.metrics.rmse_g << ',' << o.metrics.mad_g << ',' << o.metrics.rmse_p << ',' << o.metrics.mad_p << ','
          << o.tuning.B << ',' << o.tuning.J << ',' << o.tuning.m << '\n';
    }
  }
  out.precision(old_precision);
}

}  // namespace knp
