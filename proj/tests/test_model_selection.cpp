#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "knp/model_selection.hpp"

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

TEST_CASE("folds partition the sample") {
  const auto folds = make_folds(103, 5, 7);
  REQUIRE(folds.size() == 5);
  std::set<Index> seen;
  for (const auto& f : folds) {
    CHECK(f.size() >= 20);
    CHECK(f.size() <= 21);
    for (Index i : f) CHECK(seen.insert(i).second);
  }
  CHECK(seen.size() == 103);
  CHECK(make_folds(103, 5, 7) == folds);
  CHECK(make_folds(103, 5, 8) != folds);
}

TEST_CASE("singleton grid equals plain k-fold error") {
  const Dataset d = sample(100, 1);
  CvPlan plan;
  plan.grid = {{5.0, 0, 5}};
  plan.seed = 3;
  FitConfig base;
  const CvResult r = cross_validate(d, plan, base);
  CHECK(r.best == plan.grid[0]);
  // Recompute the held-out error by hand.
  double total = 0.0;
  for (const auto& held : r.folds) {
    std::vector<Index> rows;
    for (Index i = 0; i < d.size(); ++i)
      if (std::find(held.begin(), held.end(), i) == held.end()) rows.push_back(i);
    FitConfig cfg = base;
    cfg.B = 5.0;
    cfg.m = 5;
    const KnpModel m = fit(d.subset(rows), cfg);
    const Dataset te = d.subset(held);
    total += (te.y - predict_p(m, te.v, te.w)).squaredNorm() / te.size();
  }
  CHECK(r.best_score == doctest::Approx(total / 5).epsilon(1e-12));
}

TEST_CASE("scores do not depend on grid order and reruns are identical") {
  const Dataset d = sample(100, 2);
  CvPlan plan;
  plan.grid = {{1.0, 0, 5}, {3.0, 2, 5}, {3.0, 0, 8}};
  plan.seed = 5;
  const CvResult a = cross_validate(d, plan, FitConfig{});
  std::reverse(plan.grid.begin(), plan.grid.end());
  const CvResult b = cross_validate(d, plan, FitConfig{});
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.table[i].fold_scores == b.table[2 - i].fold_scores);
  CHECK(a.best == b.best);
  const CvResult c = cross_validate(d, plan, FitConfig{}, 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(b.table[i].fold_scores == c.table[i].fold_scores);
}

TEST_CASE("ties go to the smaller triple") {
  auto row = [](TuningTriple t, double mean, bool failed = false) {
    CvRow r;
    r.triple = t;
    r.mean = mean;
    r.failed = failed;
    return r;
  };
  const std::vector<CvRow> table{row({30.0, 2, 10}, 0.1), row({10.0, 2, 10}, 0.1 * (1 + 1e-12)),
                                 row({3.0, 4, 10}, 0.1), row({1.0, 0, 5}, 0.2), row({1.0, 0, 4}, 0.05, true)};
  const auto any = [](const TuningTriple&) { return true; };
  CHECK(select_best(table, any)->triple == TuningTriple{10.0, 2, 10});
  CHECK(select_best(table, [](const TuningTriple& t) { return t.J == 0; })->triple == TuningTriple{1.0, 0, 5});
  CHECK(select_best(table, [](const TuningTriple& t) { return t.J == 6; }) == nullptr);
  CHECK(tie_break_less({9.0, 0, 4}, {1.0, 2, 4}));
  CHECK(tie_break_less({9.0, 6, 4}, {1.0, 0, 5}));
}

TEST_CASE("failing triples are flagged") {
  const Dataset d = sample(100, 4);
  CvPlan plan;
  plan.grid = {{3.0, 0, 5}, {3.0, 0, 60}};  // 60 exceeds the fold gram rank
  const CvResult r = cross_validate(d, plan, FitConfig{});
  CHECK_FALSE(r.table[0].failed);
  CHECK(r.table[1].failed);
  CHECK(std::isinf(r.table[1].mean));
  CHECK(r.table[1].note.find("effective rank") != std::string::npos);
  CHECK(r.best == plan.grid[0]);
  std::ostringstream csv;
  write_cv_csv(csv, r);
  CHECK(csv.str().rfind("B,J,m,fold_1,fold_2,fold_3,fold_4,fold_5,mean,failed\n", 0) == 0);
}

TEST_CASE("plan validation") {
  const Dataset d = sample(30, 5);
  CvPlan plan;
  CHECK_THROWS_AS(cross_validate(d, plan, FitConfig{}), ValidationError);  // empty grid
  plan.grid = {{1.0, 0, 5}};
  plan.folds = 1;
  CHECK_THROWS_AS(cross_validate(d, plan, FitConfig{}), ValidationError);
  plan.folds = 16;
  CHECK_THROWS_AS(cross_validate(d, plan, FitConfig{}), ValidationError);
  plan.folds = 5;
  plan.grid = {{-1.0, 0, 5}};
  CHECK_THROWS_AS(cross_validate(d, plan, FitConfig{}), ValidationError);
}

TEST_CASE("default grid") {
  const auto g = CvPlan::default_grid(60);
  CHECK(g.size() == 64);
  CHECK(g.back().m == 60);
  CHECK(CvPlan::default_grid(1000).back().m == 100);
}
