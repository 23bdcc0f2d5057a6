// knp: command-line front end for fitting, tuning, effects, bootstrap and
// Monte Carlo runs. Exit codes: 0 success, 1 invalid input, 2 numerical
// failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "knp/effects.hpp"
#include "knp/inference.hpp"
#include "knp/knp.hpp"
#include "knp/model_io.hpp"
#include "knp/model_selection.hpp"
#include "knp/simulation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace knp;

namespace {

struct Options {
  std::string config_path;
  std::string data;
  std::string model;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<double> B, sigma;
  std::optional<int> J;
  std::optional<Index> m;
  std::optional<int> folds;
  std::string coord = "v";
  std::string where;
  std::optional<int> reps;
  std::vector<double> levels;
  std::vector<std::string> designs;
  std::optional<int> nsim;
  std::optional<Index> ntrain, ntest;
  bool emit_csv = false;
  std::vector<std::string> methods;
};

RunConfig resolve(const Options& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : read_run_config(o.config_path);
  if (!o.data.empty()) cfg.data = o.data;
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.fit.seed = *o.seed;
    cfg.cv.seed = *o.seed;
    cfg.bootstrap.seed = *o.seed;
    cfg.simulation.seed = *o.seed;
  }
  if (o.threads) cfg.threads = *o.threads;
  if (o.B) cfg.fit.B = *o.B;
  if (o.J) cfg.fit.J = *o.J;
  if (o.m) cfg.fit.m = *o.m;
  if (o.sigma) cfg.fit.sigma = *o.sigma;
  if (o.folds) cfg.cv.folds = *o.folds;
  if (o.reps) cfg.bootstrap.reps = *o.reps;
  if (!o.levels.empty()) cfg.bootstrap.levels = o.levels;
  if (o.nsim) cfg.simulation.nsim = *o.nsim;
  if (o.ntrain) cfg.simulation.ntrain = *o.ntrain;
  if (o.ntest) cfg.simulation.ntest = *o.ntest;
  if (cfg.threads < 1) throw ValidationError("--threads must be at least 1");
  return cfg;
}

Dataset load_data(const std::string& path) {
  if (path.empty()) throw ValidationError("no data file given (use --data)");
  if (path == "-") return read_csv(std::cin);
  return read_csv_file(path);
}

fs::path prepare_out_dir(const RunConfig& cfg) {
  fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory '" + cfg.out_dir + "': " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << text;
}

void write_snapshot(const fs::path& dir, const RunConfig& cfg) {
  write_text(dir / "resolved_config.json", to_json(cfg) + "\n");
}

int cmd_fit(const Options& o) {
  const RunConfig cfg = resolve(o);
  const Dataset data = load_data(cfg.data);
  const auto start = std::chrono::steady_clock::now();
  const KnpModel model = fit(data, cfg.fit);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const fs::path dir = prepare_out_dir(cfg);
  save_model_file((dir / "model.json").string(), model, cfg.fit, data.w_names);
  write_snapshot(dir, cfg);
  json summary = {{"n", data.size()},
                  {"d_w", data.dim()},
                  {"objective", model.objective},
                  {"iterations", model.diagnostics.iterations},
                  {"converged", model.diagnostics.converged},
                  {"restarts_converged", model.diagnostics.restarts_converged},
                  {"projected_gradient", model.diagnostics.pg_norm},
                  {"m_requested", model.m_requested},
                  {"m_effective", model.m_effective},
                  {"lambda_next", model.truncation_residual},
                  {"constraint_value", model.constraint_value()},
                  {"B", model.B},
                  {"J", model.hermite_order()},
                  {"seconds", seconds},
                  {"config_hash", config_hash(cfg.fit)}};
  write_text(dir / "fit_summary.json", summary.dump(2) + "\n");
  std::cout << "objective " << model.objective << ", iterations " << model.diagnostics.iterations
            << ", converged " << (model.diagnostics.converged ? "yes" : "no") << ", m " << model.m_effective
            << ", lambda_{m+1} " << model.truncation_residual << "\n"
            << "model written to " << (dir / "model.json").string() << "\n";
  return 0;
}

int cmd_cv(const Options& o) {
  RunConfig cfg = resolve(o);
  const Dataset data = load_data(cfg.data);
  if (cfg.cv.grid.empty()) cfg.cv.grid = CvPlan::default_grid(data.size());
  const CvResult result = cross_validate(data, cfg.cv, cfg.fit, cfg.threads);
  const fs::path dir = prepare_out_dir(cfg);
  {
    std::ofstream out(dir / "cv_scores.csv");
    write_cv_csv(out, result);
  }
  RunConfig best = cfg;
  best.fit.B = result.best.B;
  best.fit.J = result.best.J;
  best.fit.m = result.best.m;
  write_snapshot(dir, cfg);
  write_text(dir / "best_config.json", to_json(best) + "\n");
  int flagged = 0;
  for (const auto& row : result.table) flagged += row.failed ? 1 : 0;
  std::cout << "best (B, J, m) = (" << result.best.B << ", " << result.best.J << ", " << result.best.m
            << "), held-out MSE " << result.best_score << "; " << flagged << " of " << result.table.size()
            << " triples flagged\n";
  return 0;
}

void check_compatible(const ModelFile& mf, const Dataset& data) {
  if (static_cast<Index>(mf.w_names.size()) != data.dim())
    throw ValidationError("model (hash " + mf.config_hash + ") expects " + std::to_string(mf.w_names.size()) +
                          " w columns, data has " + std::to_string(data.dim()));
}

int cmd_effects(const Options& o) {
  const RunConfig cfg = resolve(o);
  if (o.model.empty()) throw ValidationError("effects needs --model");
  const ModelFile mf = load_model_file(o.model);
  const Dataset data = load_data(cfg.data);
  check_compatible(mf, data);
  const Index j = coordinate_index(data, o.coord);
  const double all = ape(mf.model, data, j, cfg.threads);
  const fs::path dir = prepare_out_dir(cfg);
  std::ostringstream csv;
  csv.precision(17);
  csv << "coordinate,region,estimate,n_used\n";
  csv << o.coord << ",all," << all << ',' << data.size() << '\n';
  json meta = {{"coordinate", o.coord}, {"n", data.size()}, {"ape", all}, {"model_hash", mf.config_hash}};
  std::cout << "APE_" << o.coord << " = " << all << " (n = " << data.size() << ")\n";
  if (!o.where.empty()) {
    const Region S = parse_region(o.where, data);
    const double cape = conditional_ape(mf.model, data, j, S, cfg.threads);
    const double freq = region_frequency(data, S);
    const auto n_in = static_cast<Index>(std::llround(freq * static_cast<double>(data.size())));
    csv << o.coord << ",\"" << S.description << "\"," << cape << ',' << n_in << '\n';
    meta["region"] = S.description;
    meta["cape"] = cape;
    meta["n_region"] = n_in;
    std::cout << "cAPE_" << o.coord << " | " << S.description << " = " << cape << " (n = " << n_in << ")\n";
  }
  write_text(dir / "effects.csv", csv.str());
  write_text(dir / "effects.json", meta.dump(2) + "\n");
  write_snapshot(dir, cfg);
  return 0;
}

int cmd_bootstrap(const Options& o) {
  RunConfig cfg = resolve(o);
  if (o.model.empty()) throw ValidationError("bootstrap needs --model");
  const ModelFile mf = load_model_file(o.model);
  const Dataset data = load_data(cfg.data);
  check_compatible(mf, data);
  // Tuning comes from the model file; the normalization point is pinned.
  FitConfig fit_cfg = mf.config;
  fit_cfg.w_star_policy = WStarPolicy::kUserSupplied;
  fit_cfg.w_star = mf.model.w_star_raw;
  const Index j = coordinate_index(data, o.coord);
  std::vector<BootstrapTarget> targets{ape_target(j, o.coord)};
  if (!o.where.empty()) targets.push_back(cape_target(j, o.coord, parse_region(o.where, data)));
  const BootstrapResult result = bootstrap(data, fit_cfg, cfg.bootstrap, targets, cfg.threads);
  const fs::path dir = prepare_out_dir(cfg);
  {
    std::ofstream out(dir / "intervals.csv");
    write_intervals_csv(out, result);
  }
  json meta = {{"reps", cfg.bootstrap.reps},
               {"failed_reps", result.failed_reps},
               {"levels", cfg.bootstrap.levels},
               {"seed", cfg.bootstrap.seed},
               {"model_hash", mf.config_hash},
               {"estimates", result.estimates}};
  write_text(dir / "bootstrap.json", meta.dump(2) + "\n");
  write_snapshot(dir, cfg);
  for (const auto& iv : result.intervals)
    std::cout << iv.target << " " << iv.level << ": [" << iv.lower << ", " << iv.upper << "] ("
              << iv.n_effective_reps << " reps)\n";
  return 0;
}

int cmd_simulate(const Options& o) {
  RunConfig cfg = resolve(o);
  std::vector<std::string> names = o.designs;
  if (names.empty()) names.push_back(cfg.simulation.name());
  const bool to_stdout = o.emit_csv && cfg.out_dir == "-";

  if (o.emit_csv) {
    for (const auto& name : names) {
      SimDesign d = cfg.simulation;
      const SimDesign parsed = SimDesign::parse(name);
      d.g = parsed.g;
      d.err = parsed.err;
      d.validate();
      if (to_stdout) {
        write_csv(std::cout, generate(d, Split::Train, 0).data);
        return 0;
      }
      const fs::path dir = prepare_out_dir(cfg);
      for (int r = 0; r < d.nsim; ++r) {
        for (Split split : {Split::Train, Split::Test}) {
          const SimSample s = generate(d, split, r);
          const std::string stem = d.name() + (split == Split::Train ? "_train_rep" : "_test_rep") + std::to_string(r);
          std::ofstream data_out(dir / (stem + ".csv"));
          write_csv(data_out, s.data);
          std::ofstream truth(dir / (stem + "_truth.csv"));
          truth.precision(17);
          truth << "g0,p0\n";
          for (Index i = 0; i < s.g_true.size(); ++i) truth << s.g_true(i) << ',' << s.p_true(i) << '\n';
        }
      }
    }
    write_snapshot(prepare_out_dir(cfg), cfg);
    return 0;
  }

  const fs::path dir = prepare_out_dir(cfg);
  std::vector<SimTable> tables;
  json meta = {{"seed", cfg.simulation.seed},
               {"ntrain", cfg.simulation.ntrain},
               {"ntest", cfg.simulation.ntest},
               {"nsim", cfg.simulation.nsim},
               {"threads", cfg.threads},
               {"designs", json::array()}};
  for (const auto& name : names) {
    SimDesign d = cfg.simulation;
    const SimDesign parsed = SimDesign::parse(name);
    d.g = parsed.g;
    d.err = parsed.err;
    // Ten-covariate designs score on a larger test sample unless one was
    // given explicitly.
    const bool wide_default = d.d_w() == 10 && !o.ntest && d.ntest == SimDesign{}.ntest;
    if (wide_default) d.ntest = 100000;
    SimOptions opts = SimOptions::defaults(d);
    if (cfg.sim_grid) opts.grid = *cfg.sim_grid;
    opts.base.sigma = cfg.fit.sigma;
    opts.base.optimizer = cfg.fit.optimizer;
    opts.folds = cfg.cv.folds;
    opts.threads = cfg.threads;
    if (!o.methods.empty()) {
      opts.methods.clear();
      for (const auto& m : o.methods) opts.methods.push_back(parse_method(m));
    }
    tables.push_back(replicate_table(d, opts));
    const SimTable& t = tables.back();
    {
      std::ofstream reps(dir / ("reps_" + d.name() + ".csv"));
      write_reps_csv(reps, t);
    }
    json dj = {{"design", d.name()}, {"ntest", d.ntest}, {"seconds", t.seconds}, {"grid", json::array()},
               {"failures", json::object()}};
    if (wide_default) dj["ntest_note"] = "default for d_w = 10 designs raised to 100000";
    for (const auto& g : opts.grid) dj["grid"].push_back({{"B", g.B}, {"J", g.J}, {"m", g.m}});
    for (std::size_t k = 0; k < t.methods.size(); ++k) dj["failures"][method_name(t.methods[k])] = t.failures[k];
    meta["designs"].push_back(dj);
    std::cerr << d.name() << ": " << d.nsim << " replications in " << t.seconds << " s\n";
  }
  {
    std::ofstream table(dir / "table.csv");
    write_table_csv(table, tables);
  }
  write_table_csv(std::cout, tables);
  write_text(dir / "metadata.json", meta.dump(2) + "\n");
  write_snapshot(dir, cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernelized nonparametric binary choice estimation"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON run configuration");
    sub->add_option("--seed", o.seed, "Top-level seed");
    sub->add_option("--threads", o.threads, "Worker threads");
    sub->add_option("--out-dir", o.out_dir, "Output directory");
  };
  auto tuning = [&](CLI::App* sub) {
    sub->add_option("--B", o.B, "RKHS ball radius");
    sub->add_option("--J", o.J, "Hermite order");
    sub->add_option("--m", o.m, "Retained eigenvectors");
    sub->add_option("--sigma", o.sigma, "Kernel bandwidth (standardized scale)");
  };

  auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a CSV sample");
  common(fit_cmd);
  tuning(fit_cmd);
  fit_cmd->add_option("--data", o.data, "CSV with columns y, v, w... ('-' for stdin)");

  auto* cv_cmd = app.add_subcommand("cv", "Cross-validate (B, J, m)");
  common(cv_cmd);
  tuning(cv_cmd);
  cv_cmd->add_option("--data", o.data, "CSV sample");
  cv_cmd->add_option("--folds", o.folds, "Number of folds");

  auto* eff_cmd = app.add_subcommand("effects", "Average and conditional partial effects");
  common(eff_cmd);
  eff_cmd->add_option("--model", o.model, "Model file from `fit`")->required();
  eff_cmd->add_option("--data", o.data, "Evaluation sample");
  eff_cmd->add_option("--coord", o.coord, "Coordinate: v or a w column name");
  eff_cmd->add_option("--where", o.where, "Region, e.g. \"w1>0\"");

  auto* boot_cmd = app.add_subcommand("bootstrap", "Pairs-bootstrap intervals for effects");
  common(boot_cmd);
  boot_cmd->add_option("--model", o.model, "Model file from `fit`")->required();
  boot_cmd->add_option("--data", o.data, "Sample the model was fitted on");
  boot_cmd->add_option("--coord", o.coord, "Coordinate: v or a w column name");
  boot_cmd->add_option("--where", o.where, "Region for a conditional effect");
  boot_cmd->add_option("--reps", o.reps, "Replications");
  boot_cmd->add_option("--level", o.levels, "Interval level(s)");

  auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo comparison on the simulation designs");
  common(sim_cmd);
  sim_cmd->add_option("--design", o.designs, "Design(s): IA, IB, IIA, ..., IVB");
  sim_cmd->add_option("--nsim", o.nsim, "Replications");
  sim_cmd->add_option("--ntrain", o.ntrain, "Training sample size");
  sim_cmd->add_option("--ntest", o.ntest, "Test sample size");
  sim_cmd->add_option("--methods", o.methods, "Subset of Probit KPB SNP P2PB P3PB P4PB KNP");
  sim_cmd->add_flag("--emit-csv", o.emit_csv, "Write the generated datasets instead of fitting ('--out-dir -' prints the first training sample)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*fit_cmd) return cmd_fit(o);
    if (*cv_cmd) return cmd_cv(o);
    if (*eff_cmd) return cmd_effects(o);
    if (*boot_cmd) return cmd_bootstrap(o);
    if (*sim_cmd) return cmd_simulate(o);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
