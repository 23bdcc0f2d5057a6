#include <doctest.h>

#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "knp/hermite.hpp"

using namespace knp;

namespace {

// Density integrated from -40 (where it is below 1e-300) to u.
double cdf_by_quadrature(const HermiteDistribution<double>& d, double u) {
  using boost::math::quadrature::gauss_kronrod;
  auto f = [&](double x) { return d.density(x); };
  return gauss_kronrod<double, 61>::integrate(f, -40.0, u, 20, 1e-14);
}

Vector random_tau(std::mt19937_64& rng, int J, double scale = 2.0) {
  std::uniform_real_distribution<double> U(-scale, scale);
  Vector tau(J);
  for (int r = 0; r < J; ++r) tau(r) = U(rng);
  return tau;
}

}  // namespace

TEST_CASE("normal moments") {
  const Vector a = moments_a(8);
  CHECK(a(0) == 1.0);
  CHECK(a(1) == 0.0);
  CHECK(a(2) == 1.0);
  CHECK(a(4) == 3.0);
  CHECK(a(6) == 15.0);
  CHECK(a(8) == 105.0);
  CHECK(a(7) == 0.0);
}

TEST_CASE("partial moments satisfy the three-term recursion") {
  for (double u : {-5.0, -1.3, 0.0, 0.7, 2.5, 6.0}) {
    const Vector A = partial_moments_A(u, 24);
    CHECK(A(0) == doctest::Approx(normal_cdf(u)).epsilon(1e-15));
    CHECK(A(1) == doctest::Approx(-normal_pdf(u)).epsilon(1e-15));
    for (int h = 3; h <= 24; ++h) {
      const double other = u * (A(h - 1) - (h - 2) * A(h - 3)) + (h - 1) * A(h - 2);
      CHECK(A(h) == doctest::Approx(other).epsilon(1e-10).scale(std::abs(A(h)) + 1.0));
    }
  }
}

TEST_CASE("partial moments tend to full moments") {
  const Vector A = partial_moments_A(30.0, 16);
  const Vector a = moments_a(16);
  for (int h = 0; h <= 16; ++h) CHECK(A(h) == doctest::Approx(a(h)).epsilon(1e-12));
}

TEST_CASE("J = 0 is the standard normal") {
  const HermiteDistribution<double> d;
  CHECK(d.order() == 0);
  CHECK(d.psi() == 1.0);
  for (int i = 0; i <= 100; ++i) {
    const double u = -8.0 + 0.16 * i;
    CHECK(std::abs(d.cdf(u) - normal_cdf(u)) < 1e-15);
    CHECK(std::abs(d.density(u) - normal_pdf(u)) < 1e-15);
  }
}

TEST_CASE("cdf agrees with numerical integration of the density") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-6.0, 6.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int J = 1 + trial % 8;
    const HermiteDistribution<double> d(random_tau(rng, J));
    const double u = U(rng);
    CHECK(std::abs(d.cdf(u) - cdf_by_quadrature(d, u)) < 1e-10);
  }
}

TEST_CASE("density integrates to one and cdf is monotone") {
  std::mt19937_64 rng(3);
  for (int J : {1, 3, 6, 12}) {
    const HermiteDistribution<double> d(random_tau(rng, J, 1.0));
    CHECK(cdf_by_quadrature(d, 40.0) == doctest::Approx(1.0).epsilon(1e-10));
    double prev = 0.0;
    for (int i = 0; i <= 400; ++i) {
      const double F = d.cdf(-10.0 + 0.05 * i);
      CHECK(F >= prev - 1e-15);
      CHECK(F >= 0.0);
      CHECK(F <= 1.0);
      prev = F;
    }
  }
}

TEST_CASE("tails are exact") {
  const HermiteDistribution<double> d(Vector::Constant(4, 0.5));
  CHECK(d.cdf(39.0) == 1.0);
  CHECK(d.cdf(-39.0) == 0.0);
  CHECK(d.density(50.0) == 0.0);
  double F = -1, f = -1;
  Vector g(4);
  d.evaluate(-45.0, F, f, g.data());
  CHECK(F == 0.0);
  CHECK(f == 0.0);
  CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cdf gradient matches central differences") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-4.0, 4.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int J = 1 + trial % 4;
    const Vector tau = random_tau(rng, J);
    const HermiteDistribution<double> d(tau);
    const double u = U(rng);
    const Vector g = d.cdf_grad_tau(u);
    for (int r = 0; r < J; ++r) {
      const double h = 1e-6;
      Vector tp = tau, tm = tau;
      tp(r) += h;
      tm(r) -= h;
      const double fd = (HermiteDistribution<double>(tp).cdf(u) - HermiteDistribution<double>(tm).cdf(u)) / (2 * h);
      CHECK(g(r) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("coefficient scaling leaves the distribution unchanged") {
  Vector c(3);
  c << 0.4, -1.1, 0.3;
  const auto d1 = HermiteDistribution<double>::from_coefficients(c);
  const auto d2 = HermiteDistribution<double>::from_coefficients(-3.0 * c);
  for (double u : {-2.0, 0.1, 1.7}) {
    CHECK(d1.cdf(u) == doctest::Approx(d2.cdf(u)).epsilon(1e-13));
    CHECK(d1.density(u) == doctest::Approx(d2.density(u)).epsilon(1e-13));
  }
}

TEST_CASE("invalid orders and coefficients are rejected") {
  CHECK_THROWS_AS(HermiteDistribution<double>(Vector::Zero(13)), ValidationError);
  CHECK_THROWS_AS(HermiteDistribution<double>::from_coefficients(Vector::Zero(3)), ValidationError);
  Vector bad(2);
  bad << 1.0, std::nan("");
  CHECK_THROWS_AS(HermiteDistribution<double>{bad}, ValidationError);
  CHECK_NOTHROW(HermiteDistribution<double>(Vector::Zero(12)));
}

TEST_CASE("long double instantiation") {
  VectorT<long double> tau(2);
  tau << 0.3L, -0.2L;
  const HermiteDistribution<long double> dl(tau);
  const HermiteDistribution<double> dd(tau.cast<double>());
  CHECK(static_cast<double>(dl.cdf(0.4L)) == doctest::Approx(dd.cdf(0.4)).epsilon(1e-14));
}

TEST_CASE("cdf is nondecreasing in both tails") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> z;
  for (int t = 0; t < 2000; ++t) {
    Vector tau(1 + t % 6);
    for (Index j = 0; j < tau.size(); ++j) tau(j) = (t % 3 + 0.3) * z(rng);
    const HermiteDistribution<double> dist(tau);
    double prev = 0.0;
    for (int k = 0; k < 400; ++k) {
      const double F = dist.cdf(-12.0 + 24.0 * k / 399.0);
      REQUIRE(F >= prev);
      prev = F;
    }
  }
}
