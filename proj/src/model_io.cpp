#include "knp/model_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace knp {

using nlohmann::json;

namespace {

json vec_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vec_from_json(const json& j) {
  const auto xs = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(xs.data(), static_cast<Index>(xs.size()));
}

json mat_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(vec_to_json(m.row(i).transpose()));
  return rows;
}

Matrix mat_from_json(const json& j, Index cols) {
  Matrix m(static_cast<Index>(j.size()), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Vector r = vec_from_json(j[i]);
    if (r.size() != cols) throw ValidationError("model file: ragged matrix");
    m.row(static_cast<Index>(i)) = r.transpose();
  }
  return m;
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw ValidationError("config: unknown key '" + it.key() + "' in " + where);
  }
}

json optimizer_to_json(const OptimizerOptions& o) {
  return {{"max_iters", o.max_iters}, {"grad_tol", o.grad_tol}, {"n_restarts", o.n_restarts}, {"memory", o.memory}};
}

OptimizerOptions optimizer_from_json(const json& j) {
  reject_unknown(j, {"max_iters", "grad_tol", "n_restarts", "memory"}, "optimizer");
  OptimizerOptions o;
  o.max_iters = j.value("max_iters", o.max_iters);
  o.grad_tol = j.value("grad_tol", o.grad_tol);
  o.n_restarts = j.value("n_restarts", o.n_restarts);
  o.memory = j.value("memory", o.memory);
  return o;
}

json fit_to_json(const FitConfig& c) {
  json j = {{"B", c.B},
            {"J", c.J},
            {"m", c.m},
            {"sigma", c.sigma},
            {"w_star_policy", c.w_star_policy == WStarPolicy::kUserSupplied ? "user" : "mean"},
            {"optimizer", optimizer_to_json(c.optimizer)},
            {"seed", c.seed}};
  if (c.w_star_policy == WStarPolicy::kUserSupplied) j["w_star"] = vec_to_json(c.w_star);
  return j;
}

FitConfig fit_from_json(const json& j) {
  reject_unknown(j, {"B", "J", "m", "sigma", "w_star_policy", "w_star", "optimizer", "seed"}, "fit");
  FitConfig c;
  c.B = j.value("B", c.B);
  c.J = j.value("J", c.J);
  c.m = j.value("m", c.m);
  c.sigma = j.value("sigma", c.sigma);
  const std::string policy = j.value("w_star_policy", std::string(j.contains("w_star") ? "user" : "mean"));
  if (policy == "user") {
    c.w_star_policy = WStarPolicy::kUserSupplied;
    if (!j.contains("w_star")) throw ValidationError("config: w_star_policy 'user' needs w_star");
    c.w_star = vec_from_json(j.at("w_star"));
  } else if (policy != "mean") {
    throw ValidationError("config: w_star_policy must be 'mean' or 'user'");
  }
  if (j.contains("optimizer")) c.optimizer = optimizer_from_json(j.at("optimizer"));
  c.seed = j.value("seed", c.seed);
  return c;
}

json grid_to_json(const std::vector<TuningTriple>& grid) {
  json g = json::array();
  for (const auto& t : grid) g.push_back({{"B", t.B}, {"J", t.J}, {"m", t.m}});
  return g;
}

std::vector<TuningTriple> grid_from_json(const json& j) {
  std::vector<TuningTriple> grid;
  for (const auto& t : j) {
    reject_unknown(t, {"B", "J", "m"}, "grid entry");
    grid.push_back({t.at("B").get<double>(), t.at("J").get<int>(), t.at("m").get<Index>()});
  }
  return grid;
}

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

template <typename F>
auto parse_guard(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ValidationError(what + ": " + e.what());
  }
}

}  // namespace

std::string to_json(const RunConfig& cfg) {
  json j;
  j["data"] = cfg.data;
  j["out_dir"] = cfg.out_dir;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["fit"] = fit_to_json(cfg.fit);
  j["cv"] = {{"folds", cfg.cv.folds}, {"grid", grid_to_json(cfg.cv.grid)}, {"seed", cfg.cv.seed}};
  j["bootstrap"] = {{"reps", cfg.bootstrap.reps},
                    {"levels", cfg.bootstrap.levels},
                    {"seed", cfg.bootstrap.seed},
                    {"max_failure_rate", cfg.bootstrap.max_failure_rate}};
  j["simulation"] = {{"design", cfg.simulation.name()},
                     {"ntrain", cfg.simulation.ntrain},
                     {"ntest", cfg.simulation.ntest},
                     {"nsim", cfg.simulation.nsim},
                     {"seed", cfg.simulation.seed}};
  if (cfg.sim_grid) j["simulation"]["grid"] = grid_to_json(*cfg.sim_grid);
  return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
  return parse_guard("config", [&] {
    const json j = json::parse(text);
    if (!j.is_object()) throw ValidationError("config: top level must be an object");
    reject_unknown(j, {"data", "out_dir", "seed", "threads", "fit", "cv", "bootstrap", "simulation"}, "config");
    RunConfig c;
    c.data = j.value("data", c.data);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    if (j.contains("fit")) c.fit = fit_from_json(j.at("fit"));
    if (j.contains("cv")) {
      const json& cv = j.at("cv");
      reject_unknown(cv, {"folds", "grid", "seed"}, "cv");
      c.cv.folds = cv.value("folds", c.cv.folds);
      c.cv.seed = cv.value("seed", c.cv.seed);
      if (cv.contains("grid")) c.cv.grid = grid_from_json(cv.at("grid"));
    }
    if (j.contains("bootstrap")) {
      const json& b = j.at("bootstrap");
      reject_unknown(b, {"reps", "levels", "seed", "max_failure_rate"}, "bootstrap");
      c.bootstrap.reps = b.value("reps", c.bootstrap.reps);
      c.bootstrap.seed = b.value("seed", c.bootstrap.seed);
      c.bootstrap.max_failure_rate = b.value("max_failure_rate", c.bootstrap.max_failure_rate);
      if (b.contains("levels")) c.bootstrap.levels = b.at("levels").get<std::vector<double>>();
    }
    if (j.contains("simulation")) {
      const json& s = j.at("simulation");
      reject_unknown(s, {"design", "ntrain", "ntest", "nsim", "seed", "grid"}, "simulation");
      if (s.contains("design")) {
        const SimDesign parsed = SimDesign::parse(s.at("design").get<std::string>());
        c.simulation.g = parsed.g;
        c.simulation.err = parsed.err;
      }
      c.simulation.ntrain = s.value("ntrain", c.simulation.ntrain);
      c.simulation.ntest = s.value("ntest", c.simulation.ntest);
      c.simulation.nsim = s.value("nsim", c.simulation.nsim);
      c.simulation.seed = s.value("seed", c.simulation.seed);
      if (s.contains("grid")) c.sim_grid = grid_from_json(s.at("grid"));
    }
    return c;
  });
}

RunConfig read_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return run_config_from_json(text.str());
}

std::string config_hash(const FitConfig& cfg) { return fnv1a_hex(fit_to_json(cfg).dump()); }

void save_model(std::ostream& out, const KnpModel& model, const FitConfig& cfg,
                const std::vector<std::string>& w_names) {
  json j;
  j["format"] = kModelFormat;
  j["version"] = {kModelFormatMajor, kModelFormatMinor};
  j["config"] = fit_to_json(cfg);
  j["config_hash"] = config_hash(cfg);
  j["w_names"] = w_names;
  j["bandwidth"] = model.kernel.bandwidth();
  j["standardization"] = {{"mean", vec_to_json(model.standardization.mean)},
                          {"scale", vec_to_json(model.standardization.scale)},
                          {"constant", model.standardization.constant}};
  j["centers"] = mat_to_json(model.centers);
  j["w_star_raw"] = vec_to_json(model.w_star_raw);
  j["delta"] = vec_to_json(model.delta);
  j["zeta"] = vec_to_json(model.zeta);
  j["eigenvalues"] = vec_to_json(model.eigenvalues);
  j["tau"] = vec_to_json(model.dist.tau());
  j["B"] = model.B;
  j["m_requested"] = model.m_requested;
  j["m_effective"] = model.m_effective;
  j["truncation_residual"] = model.truncation_residual;
  j["objective"] = model.objective;
  const auto& d = model.diagnostics;
  j["diagnostics"] = {{"iterations", d.iterations},       {"best_restart", d.best_restart},
                      {"restarts", d.restarts},           {"restarts_converged", d.restarts_converged},
                      {"converged", d.converged},         {"pg_norm", d.pg_norm}};
  out << j.dump(1) << '\n';
}

void save_model_file(const std::string& path, const KnpModel& model, const FitConfig& cfg,
                     const std::vector<std::string>& w_names) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write model file '" + path + "'");
  save_model(out, model, cfg, w_names);
}

ModelFile load_model(std::istream& in) {
  return parse_guard("model file", [&] {
    const json j = json::parse(in);
    if (!j.is_object() || j.value("format", std::string()) != kModelFormat)
      throw ValidationError("model file: not a knp model");
    const auto version = j.at("version").get<std::vector<int>>();
    if (version.size() != 2 || version[0] != kModelFormatMajor)
      throw ValidationError("model file: format version " + std::to_string(version.empty() ? -1 : version[0]) +
                            " is not supported (expected major " + std::to_string(kModelFormatMajor) + ")");
    ModelFile f;
    f.config = fit_from_json(j.at("config"));
    f.config_hash = j.at("config_hash").get<std::string>();
    f.w_names = j.at("w_names").get<std::vector<std::string>>();
    KnpModel& m = f.model;
    m.kernel = KernelSpec<double>(j.at("bandwidth").get<double>());
    const json& s = j.at("standardization");
    m.standardization.mean = vec_from_json(s.at("mean"));
    m.standardization.scale = vec_from_json(s.at("scale"));
    m.standardization.constant = s.at("constant").get<std::vector<bool>>();
    const Index d = m.standardization.mean.size();
    m.centers = mat_from_json(j.at("centers"), d);
    m.w_star_raw = vec_from_json(j.at("w_star_raw"));
    m.delta = vec_from_json(j.at("delta"));
    m.zeta = vec_from_json(j.at("zeta"));
    m.eigenvalues = vec_from_json(j.at("eigenvalues"));
    m.dist = HermiteDistribution<double>(vec_from_json(j.at("tau")));
    m.B = j.at("B").get<double>();
    m.m_requested = j.at("m_requested").get<Index>();
    m.m_effective = j.at("m_effective").get<Index>();
    m.truncation_residual = j.at("truncation_residual").get<double>();
    m.objective = j.at("objective").get<double>();
    const json& dg = j.at("diagnostics");
    m.diagnostics = FitDiagnostics{dg.at("iterations").get<int>(),         dg.at("best_restart").get<int>(),
                                   dg.at("restarts").get<int>(),           dg.at("restarts_converged").get<int>(),
                                   dg.at("converged").get<bool>(),         dg.at("pg_norm").get<double>()};
    if (m.delta.size() != m.centers.rows() || m.standardization.scale.size() != d ||
        static_cast<Index>(f.w_names.size()) != d || m.w_star_raw.size() != d)
      throw ValidationError("model file: inconsistent dimensions");
    if (config_hash(f.config) != f.config_hash) throw ValidationError("model file: config hash mismatch");
    finalize_model(m);
    return f;
  });
}

ModelFile load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open model file '" + path + "'");
  return load_model(in);
}

}  // namespace knp
