#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "knp/effects.hpp"
#include "knp/knp.hpp"

namespace knp {

struct BootstrapSpec {
  int reps = 1000;
  std::vector<double> levels{0.90, 0.95};
  std::uint64_t seed = 0;
  double max_failure_rate = 0.05;

  void validate() const;
};

/// Scalar functional of a fitted model. `sample` is the data the model was
/// fitted on (the resample inside a replication).
struct BootstrapTarget {
  std::string id;
  std::function<double(const KnpModel& model, const Dataset& sample)> evaluate;
};

BootstrapTarget ape_target(Index j, const std::string& name);
BootstrapTarget cape_target(Index j, const std::string& name, const Region& S);
BootstrapTarget g_target(const Vector& w, const std::string& id);
BootstrapTarget p_target(double v, const Vector& w, const std::string& id);

struct Interval {
  std::string target;
  double level = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  int n_effective_reps = 0;
};

struct BootstrapResult {
  std::vector<double> estimates;              // targets on the original fit
  std::vector<std::vector<double>> replicates;  // [target][successful rep]
  std::vector<Interval> intervals;            // target-major, then level
  int failed_reps = 0;
  std::vector<std::string> failure_notes;
};

/// Percentile interval from order statistics of the replicates: positions
/// floor((R+1) a/2) and ceil((R+1)(1 - a/2)) (1-based), clamped to [1, R].
std::pair<double, double> percentile_interval(std::vector<double> values, double level);

/// Pairs bootstrap with fixed tuning. Each replication resamples rows with
/// replacement and refits with cfg, with the normalization point pinned to
/// the original fit's. Failed refits are dropped; more than
/// spec.max_failure_rate of them is a NumericalError.
BootstrapResult bootstrap(const Dataset& data, const FitConfig& cfg, const BootstrapSpec& spec,
                          const std::vector<BootstrapTarget>& targets, int threads = 1);

/// Columns: target, level, lower, upper, n_effective_reps.
void write_intervals_csv(std::ostream& out, const BootstrapResult& result);

}  // namespace knp
