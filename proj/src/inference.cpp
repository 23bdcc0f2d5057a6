#include "knp/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "knp/parallel.hpp"
#include "knp/rng.hpp"

namespace knp {

void BootstrapSpec::validate() const {
  if (reps < 50) throw ValidationError("bootstrap: at least 50 replications are required for intervals");
  if (levels.empty()) throw ValidationError("bootstrap: no interval levels");
  for (double l : levels)
    if (!(l > 0.0 && l < 1.0)) throw ValidationError("bootstrap: levels must lie in (0, 1)");
  if (!(max_failure_rate >= 0.0 && max_failure_rate < 1.0))
    throw ValidationError("bootstrap: max_failure_rate must lie in [0, 1)");
}

BootstrapTarget ape_target(Index j, const std::string& name) {
  return {"ape_" + name, [j](const KnpModel& m, const Dataset& d) { return ape(m, d, j); }};
}

BootstrapTarget cape_target(Index j, const std::string& name, const Region& S) {
  return {"cape_" + name + "[" + S.description + "]",
          [j, S](const KnpModel& m, const Dataset& d) { return conditional_ape(m, d, j, S); }};
}

BootstrapTarget g_target(const Vector& w, const std::string& id) {
  return {id, [w](const KnpModel& m, const Dataset&) { return predict_g(m, w); }};
}

BootstrapTarget p_target(double v, const Vector& w, const std::string& id) {
  return {id, [v, w](const KnpModel& m, const Dataset&) { return predict_p(m, v, w); }};
}

std::pair<double, double> percentile_interval(std::vector<double> values, double level) {
  if (values.empty()) throw ValidationError("percentile_interval: no replicates");
  std::sort(values.begin(), values.end());
  const double alpha = 1.0 - level;
  const double R = static_cast<double>(values.size());
  auto at = [&](double pos) {
    const auto k = static_cast<std::size_t>(std::clamp(pos, 1.0, R));
    return values[k - 1];
  };
  // The slack absorbs round-off in products such as 100 * 0.05.
  constexpr double slack = 1e-9;
  return {at(std::floor((R + 1.0) * alpha / 2.0 + slack)), at(std::ceil((R + 1.0) * (1.0 - alpha / 2.0) - slack))};
}

BootstrapResult bootstrap(const Dataset& data, const FitConfig& cfg, const BootstrapSpec& spec,
                          const std::vector<BootstrapTarget>& targets, int threads) {
  spec.validate();
  if (targets.empty()) throw ValidationError("bootstrap: no targets");

  const KnpModel original = fit(data, cfg);
  FitConfig rep_cfg = cfg;
  rep_cfg.w_star_policy = WStarPolicy::kUserSupplied;
  rep_cfg.w_star = original.w_star_raw;

  BootstrapResult result;
  for (const auto& t : targets) result.estimates.push_back(t.evaluate(original, data));

  const Index n = data.size();
  const std::size_t T = targets.size();
  std::vector<std::optional<std::vector<double>>> values(static_cast<std::size_t>(spec.reps));
  std::vector<std::string> notes(static_cast<std::size_t>(spec.reps));
  parallel_for(static_cast<std::size_t>(spec.reps), threads, [&](std::size_t r) {
    Rng rng = substream(spec.seed, "bootstrap", r);
    std::uniform_int_distribution<Index> pick(0, n - 1);
    std::vector<Index> rows(static_cast<std::size_t>(n));
    for (auto& i : rows) i = pick(rng);
    try {
      const Dataset sample = data.subset(rows);
      const KnpModel model = fit(sample, rep_cfg);
      std::vector<double> out(T);
      for (std::size_t t = 0; t < T; ++t) out[t] = targets[t].evaluate(model, sample);
      values[r] = std::move(out);
    } catch (const ValidationError& e) {
      notes[r] = e.what();
    } catch (const NumericalError& e) {
      notes[r] = e.what();
    }
  });

  result.replicates.assign(T, {});
  for (std::size_t r = 0; r < values.size(); ++r) {
    if (!values[r]) {
      ++result.failed_reps;
      result.failure_notes.push_back("rep " + std::to_string(r) + ": " + notes[r]);
      continue;
    }
    for (std::size_t t = 0; t < T; ++t) result.replicates[t].push_back((*values[r])[t]);
  }
  if (result.failed_reps > spec.max_failure_rate * spec.reps) {
    std::ostringstream msg;
    msg << "bootstrap: " << result.failed_reps << " of " << spec.reps << " refits failed (limit "
        << spec.max_failure_rate * 100.0 << "%); first: " << result.failure_notes.front();
    throw NumericalError(msg.str());
  }

  for (std::size_t t = 0; t < T; ++t) {
    for (double level : spec.levels) {
      const auto [lo, hi] = percentile_interval(result.replicates[t], level);
      result.intervals.push_back({targets[t].id, level, lo, hi, static_cast<int>(result.replicates[t].size())});
    }
  }
  return result;
}

void write_intervals_csv(std::ostream& out, const BootstrapResult& result) {
  const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
  out << "target,level,lower,upper,n_effective_reps\n";
  for (const auto& iv : result.intervals) {
    std::string id = iv.target;
    if (id.find_first_of(",\"") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : id) quoted += (c == '"') ? std::string("\"\"") : std::string(1, c);
      id = quoted + "\"";
    }
    out << id << ',' << iv.level << ',' << iv.lower << ',' << iv.upper << ',' << iv.n_effective_reps << '\n';
  }
  out.precision(old_precision);
}

}  // namespace knp
