#include <doctest.h>

#include <sstream>

#include "knp/simulation.hpp"

using namespace knp;

TEST_CASE("design names") {
  for (const char* n : {"IA", "IB", "IIA", "IIB", "IIIA", "IIIB", "IVA", "IVB"})
    CHECK(SimDesign::parse(n).name() == n);
  CHECK(SimDesign::parse("IIIA").d_w() == 10);
  CHECK(SimDesign::parse("IIB").d_w() == 1);
  CHECK_THROWS_AS(SimDesign::parse("VA"), ValidationError);
  CHECK_THROWS_AS(SimDesign::parse("IC"), ValidationError);
  CHECK_THROWS_AS(SimDesign::parse("A"), ValidationError);
}

TEST_CASE("true functions") {
  const SimDesign ia = SimDesign::parse("IA");
  const SimDesign ib = SimDesign::parse("IB");
  const SimDesign iia = SimDesign::parse("IIA");
  CHECK(true_F(ia, 0.0 + true_g(ia, Vector::Zero(1))) == 0.5);
  CHECK(true_F(ib, 0.0) == doctest::Approx(0.25 * normal_cdf(3.0) + 0.75 * normal_cdf(-2.0)).epsilon(1e-15));
  CHECK(true_F(ib, 0.0) == doctest::Approx(0.26672).epsilon(1e-4));
  CHECK(true_g(iia, Vector::Constant(1, 1.0)) == doctest::Approx(0.5).epsilon(1e-15));
  Vector ones = Vector::Ones(10);
  double s = 0.0;
  for (double b : kDesignBeta) s += b;
  CHECK(true_g(SimDesign::parse("IIIA"), ones) == doctest::Approx(s));
  CHECK(true_g(SimDesign::parse("IVA"), Vector::Zero(10)) == 0.0);
}

TEST_CASE("generated samples") {
  SimDesign d = SimDesign::parse("IIB");
  d.ntrain = 500;
  d.ntest = 300;
  d.seed = 4;
  const SimSample tr = generate(d, Split::Train, 0);
  CHECK(tr.data.size() == 500);
  CHECK(generate(d, Split::Test, 0).data.size() == 300);
  CHECK(tr.data.w.minCoeff() >= -2.0);
  CHECK(tr.data.w.maxCoeff() <= 2.0);
  for (Index i = 0; i < 500; ++i) {
    CHECK(tr.g_true(i) == true_g(d, tr.data.w.row(i).transpose()));
    CHECK(tr.p_true(i) == true_F(d, tr.data.v(i) + tr.g_true(i)));
  }
  const SimSample again = generate(d, Split::Train, 0);
  CHECK(again.data.y == tr.data.y);
  CHECK(again.data.w == tr.data.w);
  CHECK(generate(d, Split::Train, 1).data.v != tr.data.v);

  SimDesign wide = SimDesign::parse("IVA");
  wide.ntrain = 50;
  const SimSample s = generate(wide, Split::Train, 0);
  CHECK(s.data.dim() == 10);
  CHECK(s.data.w.minCoeff() >= 0.0);
  CHECK(s.data.w.maxCoeff() <= 1.0);
}

TEST_CASE("outcome frequencies follow the model") {
  // Mean of y equals the mean of p0 up to binomial noise.
  SimDesign d = SimDesign::parse("IB");
  d.ntrain = 200000;
  d.seed = 8;
  const SimSample s = generate(d, Split::Train, 0);
  const double se = std::sqrt(0.25 / 200000.0);
  CHECK(std::abs(s.data.y.mean() - s.p_true.mean()) < 4 * se);
}

TEST_CASE("scores") {
  const Vector g = Vector::LinSpaced(5, -1, 1);
  const Metrics zero = score(g, g, g, g);
  CHECK(zero.rmse_g == 0.0);
  CHECK(zero.mad_p == 0.0);
  Vector gh = g;
  gh(0) += 1.0;
  gh(3) -= 0.5;
  const Metrics m = score(gh, g, g, g);
  CHECK(m.rmse_g == doctest::Approx(std::sqrt(1.25 / 5)));
  CHECK(m.mad_g == doctest::Approx(1.5 / 5));
  CHECK(m.rmse_g >= m.mad_g);
  CHECK_THROWS_AS(score(g, Vector::Zero(3), g, g), ValidationError);
}

TEST_CASE("small replicate table") {
  SimDesign d = SimDesign::parse("IA");
  d.ntrain = 200;
  d.ntest = 500;
  d.nsim = 2;
  d.seed = 1;
  SimOptions opts = SimOptions::defaults(d);
  opts.grid = {{10.0, 0, 8}, {10.0, 2, 8}};
  const SimTable t = replicate_table(d, opts);
  REQUIRE(t.reps.size() == 2);
  REQUIRE(t.methods.size() == 7);
  for (const auto& rep : t.reps)
    for (const auto& o : rep) {
      CHECK(o.ok);
      CHECK(o.metrics.rmse_g >= o.metrics.mad_g);
      CHECK(o.metrics.rmse_p >= o.metrics.mad_p);
    }
  for (std::size_t k = 0; k < 7; ++k)
    CHECK(t.means[k].rmse_p == doctest::Approx((t.reps[0][k].metrics.rmse_p + t.reps[1][k].metrics.rmse_p) / 2));
  std::ostringstream a, b;
  write_table_csv(a, {t});
  CHECK(a.str().rfind("design,metric,Probit,KPB,SNP,P2PB,P3PB,P4PB,KNP\nIA,RMSE_g,", 0) == 0);
  // Same seed, same table, whatever the thread count.
  opts.threads = 2;
  write_table_csv(b, {replicate_table(d, opts)});
  CHECK(a.str() == b.str());
  std::ostringstream reps;
  write_reps_csv(reps, t);
  const std::string text = reps.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 15);
}

TEST_CASE("single replication table equals the method result") {
  SimDesign d = SimDesign::parse("IIA");
  d.ntrain = 150;
  d.ntest = 200;
  d.nsim = 1;
  SimOptions opts = SimOptions::defaults(d);
  opts.methods = {Method::Probit, Method::P3PB};
  const SimTable t = replicate_table(d, opts);
  CHECK(t.means[1].rmse_g == t.reps[0][1].metrics.rmse_g);
  CHECK(parse_method("P3PB") == Method::P3PB);
  CHECK_THROWS_AS(parse_method("Logit"), ValidationError);
}

TEST_CASE("probit baseline is accurate when correctly specified") {
  SimDesign d = SimDesign::parse("IA");
  d.ntrain = 4000;
  d.ntest = 2000;
  d.seed = 21;
  SimOptions opts = SimOptions::defaults(d);
  const SimSample train = generate(d, Split::Train, 0);
  const SimSample test = generate(d, Split::Test, 0);
  const MethodOutcome o = run_baseline(Method::Probit, train, test, opts, 1);
  REQUIRE(o.ok);
  CHECK(o.metrics.rmse_g < 0.1);
  CHECK(o.metrics.rmse_p < 0.03);
}
