#include <doctest.h>

#include <random>
#include <sstream>

#include "knp/inference.hpp"

using namespace knp;

namespace {

Dataset sample(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  Vector y(n), v(n);
  Matrix w(n, 1);
  for (Index i = 0; i < n; ++i) {
    v(i) = z(rng);
    w(i, 0) = U(rng);
    y(i) = v(i) + w(i, 0) - z(rng) > 0 ? 1.0 : 0.0;
  }
  return make_dataset(y, v, w);
}

}  // namespace

TEST_CASE("percentile interval order statistics") {
  std::vector<double> x;
  for (int i = 1; i <= 99; ++i) x.push_back(100 - i);  // 99..1, unsorted
  const auto [lo, hi] = percentile_interval(x, 0.90);
  CHECK(lo == 5.0);   // floor(100 * 0.05) = 5th smallest
  CHECK(hi == 95.0);  // ceil(100 * 0.95) = 95th smallest
  const auto [a, b] = percentile_interval({2.0}, 0.9);
  CHECK(a == 2.0);
  CHECK(b == 2.0);
  CHECK_THROWS_AS(percentile_interval({}, 0.9), ValidationError);
}

TEST_CASE("bootstrap intervals") {
  const Dataset d = sample(120, 1);
  FitConfig cfg;
  cfg.m = 6;
  cfg.B = 5;
  BootstrapSpec spec;
  spec.reps = 50;
  spec.levels = {0.9};
  spec.seed = 11;
  const KnpModel original = fit(d, cfg);
  const std::vector<BootstrapTarget> targets{ape_target(0, "v"), g_target(original.w_star_raw, "g_at_w_star"),
                                             p_target(0.0, Vector::Constant(1, 1.0), "p_01")};
  const BootstrapResult r = bootstrap(d, cfg, spec, targets, 2);
  REQUIRE(r.intervals.size() == 3);
  CHECK(r.failed_reps == 0);
  for (const auto& iv : r.intervals) {
    CHECK(std::isfinite(iv.lower));
    CHECK(iv.lower <= iv.upper);
    CHECK(iv.n_effective_reps == 50);
  }
  // The normalization point is pinned, so g there is exactly zero.
  CHECK(r.intervals[1].lower == 0.0);
  CHECK(r.intervals[1].upper == 0.0);

  const BootstrapResult again = bootstrap(d, cfg, spec, targets, 1);
  for (std::size_t k = 0; k < r.intervals.size(); ++k) {
    CHECK(again.intervals[k].lower == r.intervals[k].lower);
    CHECK(again.intervals[k].upper == r.intervals[k].upper);
  }
  std::ostringstream csv;
  write_intervals_csv(csv, r);
  CHECK(csv.str().rfind("target,level,lower,upper,n_effective_reps\nape_v,0.9", 0) == 0);
}

TEST_CASE("bootstrap spec validation") {
  const Dataset d = sample(50, 2);
  BootstrapSpec spec;
  spec.reps = 20;
  CHECK_THROWS_AS(bootstrap(d, FitConfig{}, spec, {ape_target(0, "v")}), ValidationError);
  spec.reps = 50;
  spec.levels = {1.2};
  CHECK_THROWS_AS(bootstrap(d, FitConfig{}, spec, {ape_target(0, "v")}), ValidationError);
  spec.levels = {0.9};
  CHECK_THROWS_AS(bootstrap(d, FitConfig{}, spec, {}), ValidationError);
}

TEST_CASE("excessive refit failures are an error") {
  const Dataset d = sample(60, 3);
  FitConfig cfg;
  cfg.m = 6;
  BootstrapSpec spec;
  spec.reps = 50;
  // A target that throws a numerical error in every replication.
  BootstrapTarget bad{"bad", [](const KnpModel&, const Dataset& s) -> double {
                        if (s.size() > 0) throw NumericalError("nope");
                        return 0.0;
                      }};
  BootstrapTarget ok = ape_target(0, "v");
  CHECK_THROWS_AS(bootstrap(d, cfg, spec, {ok, bad}), std::exception);
}
