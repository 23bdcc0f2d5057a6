#include <doctest.h>

#include <random>
#include <sstream>

#include "knp/model_io.hpp"

using namespace knp;

TEST_CASE("run config round trip") {
  RunConfig c;
  c.data = "sample.csv";
  c.seed = 99;
  c.threads = 3;
  c.fit.B = 3.5;
  c.fit.J = 4;
  c.fit.m = 25;
  c.fit.w_star_policy = WStarPolicy::kUserSupplied;
  c.fit.w_star = Vector::Constant(2, 0.25);
  c.cv.grid = {{1.0, 0, 10}, {3.0, 2, 25}};
  c.bootstrap.levels = {0.8};
  c.simulation = SimDesign::parse("IIIB");
  c.simulation.ntest = 100000;
  c.sim_grid = std::vector<TuningTriple>{{10.0, 2, 12}};
  const std::string text = to_json(c);
  const RunConfig back = run_config_from_json(text);
  CHECK(to_json(back) == text);
  CHECK(back.fit.w_star == c.fit.w_star);
  CHECK(back.simulation.name() == "IIIB");
  CHECK(back.cv.grid.size() == 2);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(run_config_from_json("{\"fit\": {\"bogus\": 1}}"), ValidationError);
  CHECK_THROWS_AS(run_config_from_json("{not json"), ValidationError);
  CHECK_THROWS_AS(run_config_from_json("{\"simulation\": {\"design\": \"VA\"}}"), ValidationError);
  const RunConfig partial = run_config_from_json("{\"fit\": {\"J\": 2}}");
  CHECK(partial.fit.J == 2);
  CHECK(partial.fit.B == FitConfig{}.B);
}

TEST_CASE("model file round trip reproduces predictions bit for bit") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  const Index n = 80;
  Vector y(n), v(n);
  Matrix w(n, 2);
  for (Index i = 0; i < n; ++i) {
    v(i) = z(rng);
    w(i, 0) = z(rng);
    w(i, 1) = 3.0 + z(rng);
    y(i) = v(i) + 0.5 * w(i, 0) - z(rng) > 0;
  }
  const Dataset d = make_dataset(y, v, w);
  FitConfig cfg;
  cfg.J = 2;
  cfg.m = 8;
  const KnpModel model = fit(d, cfg);
  std::stringstream buf;
  save_model(buf, model, cfg, d.w_names);
  const ModelFile back = load_model(buf);
  CHECK(back.config_hash == config_hash(cfg));
  CHECK(back.w_names == d.w_names);
  const Vector p1 = predict_p(model, d.v, d.w);
  const Vector p2 = predict_p(back.model, d.v, d.w);
  CHECK(p1 == p2);
  CHECK(predict_g(back.model, back.model.w_star_raw) == 0.0);
}

TEST_CASE("model file version check") {
  std::istringstream wrong("{\"format\": \"knp-model\", \"version\": [2, 0]}");
  try {
    load_model(wrong);
    FAIL("expected a version error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
  std::istringstream other("{\"hello\": 1}");
  CHECK_THROWS_AS(load_model(other), ValidationError);
}
