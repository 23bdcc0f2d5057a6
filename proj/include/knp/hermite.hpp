#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "knp/common.hpp"

namespace knp {

/// Highest supported polynomial order. Moments up to order 2*kMaxHermiteOrder
/// stay well inside double precision.
inline constexpr int kMaxHermiteOrder = 12;

/// Beyond this |u| the standard normal density underflows; the CDF is
/// reported as exactly 0 or 1.
inline constexpr double kTailCutoff = 38.0;

/// Raw moments a_h = E[Z^h] of the standard normal, h = 0..h_max.
template <typename Scalar = double>
VectorT<Scalar> moments_a(int h_max) {
  if (h_max < 0) throw ValidationError("moments_a: h_max must be nonnegative");
  VectorT<Scalar> a(h_max + 1);
  for (int h = 0; h <= h_max; ++h) {
    if (h == 0) a(h) = Scalar(1);
    else if (h == 1) a(h) = Scalar(0);
    else if (h == 2) a(h) = Scalar(1);
    else a(h) = Scalar(h - 1) * a(h - 2);
  }
  return a;
}

namespace detail {

// Writes A_0(u)..A_{h_max}(u) into out.
template <typename Scalar>
void fill_partial_moments(Scalar u, int h_max, Scalar* out) {
  const Scalar phi = normal_pdf(u);
  out[0] = normal_cdf(u);
  if (h_max >= 1) out[1] = -phi;
  Scalar upow = Scalar(1);  // u^{h-1}
  for (int h = 2; h <= h_max; ++h) {
    upow *= u;
    out[h] = Scalar(h - 1) * out[h - 2] - upow * phi;
  }
}

// Upper partial moments int_u^inf z^h phi(z) dz, h = 0..h_max.
template <typename Scalar>
void fill_upper_moments(Scalar u, int h_max, Scalar* out) {
  const Scalar phi = normal_pdf(u);
  out[0] = normal_cdf(-u);
  if (h_max >= 1) out[1] = phi;
  Scalar upow = Scalar(1);
  for (int h = 2; h <= h_max; ++h) {
    upow *= u;
    out[h] = Scalar(h - 1) * out[h - 2] + upow * phi;
  }
}

}  // namespace detail

/// Partial moments A_h(u) = int_{-inf}^u z^h phi(z) dz, h = 0..h_max.
///
/// Uses A_h = (h-1) A_{h-2} - u^{h-1} phi(u), which is the same recursion as
/// u (A_{h-1} - (h-2) A_{h-3}) + (h-1) A_{h-2} after substituting the
/// bracket, without the cancellation in the bracket for large u.
template <typename Scalar = double>
VectorT<Scalar> partial_moments_A(Scalar u, int h_max) {
  if (h_max < 0) throw ValidationError("partial_moments_A: h_max must be nonnegative");
  VectorT<Scalar> A(h_max + 1);
  detail::fill_partial_moments(u, h_max, A.data());
  return A;
}

/// Squared-Hermite error distribution
///   f(u) = (sum_r c_r u^r)^2 phi(u) / psi,  F(u) = sum_h gamma_h A_h(u) / psi
/// with c_0 = 1 in the usual parameterization (c = (1, tau_1..tau_J)).
template <typename Scalar = double>
class HermiteDistribution {
 public:
  /// Standard normal (J = 0).
  HermiteDistribution() : HermiteDistribution(VectorT<Scalar>()) {}

  /// c = (1, tau).
  explicit HermiteDistribution(const VectorT<Scalar>& tau) {
    VectorT<Scalar> c(tau.size() + 1);
    c(0) = Scalar(1);
    c.tail(tau.size()) = tau;
    init(std::move(c));
  }

  /// Arbitrary nonzero coefficient vector (c_0..c_J), c_0 not fixed. The
  /// family is invariant to rescaling c.
  static HermiteDistribution from_coefficients(const VectorT<Scalar>& c) {
    if (c.size() < 1) throw ValidationError("HermiteDistribution: empty coefficient vector");
    HermiteDistribution d;
    d.init(c);
    return d;
  }

  int order() const { return static_cast<int>(coeffs_.size()) - 1; }
  /// (tau_1..tau_J); equals the free parameters when c_0 = 1.
  VectorT<Scalar> tau() const { return coeffs_.tail(coeffs_.size() - 1); }
  const VectorT<Scalar>& coefficients() const { return coeffs_; }
  const VectorT<Scalar>& gamma() const { return gamma_; }
  const VectorT<Scalar>& moments() const { return a_; }
  Scalar psi() const { return psi_; }

  Scalar polynomial(Scalar u) const {
    Scalar p = Scalar(0);
    for (Index r = coeffs_.size() - 1; r >= 0; --r) p = p * u + coeffs_(r);
    return p;
  }

  Scalar density(Scalar u) const {
    if (std::abs(static_cast<double>(u)) > kTailCutoff) return Scalar(0);
    const Scalar p = polynomial(u);
    return p * p * normal_pdf(u) / psi_;
  }

  Scalar cdf(Scalar u) const {
    if (static_cast<double>(u) > kTailCutoff) return Scalar(1);
    if (static_cast<double>(u) < -kTailCutoff) return Scalar(0);
    Scalar F, f;
    evaluate(u, F, f, nullptr);
    return F;
  }

  /// dF(u)/dc_r for r = 1..J with c_0 held fixed.
  VectorT<Scalar> cdf_grad_tau(Scalar u) const {
    VectorT<Scalar> g(order());
    Scalar F, f;
    evaluate(u, F, f, g.data());
    return g;
  }

  /// CDF, density and (when grad != nullptr) dF/dtau into grad[0..J-1].
  void evaluate(Scalar u, Scalar& F, Scalar& f, Scalar* grad) const {
    const int J = order();
    if (grad)
      for (int r = 0; r < J; ++r) grad[r] = Scalar(0);
    const double ud = static_cast<double>(u);
    if (ud > kTailCutoff) { F = Scalar(1); f = Scalar(0); return; }
    if (ud < -kTailCutoff) { F = Scalar(0); f = Scalar(0); return; }
    const Scalar p = polynomial(u);
    f = p * p * normal_pdf(u) / psi_;
    std::array<Scalar, 2 * kMaxHermiteOrder + 1> A;
    detail::fill_partial_moments(u, 2 * J, A.data());
    Scalar lower = weighted_sum(A.data()) / psi_;
    // Above the median the lower sum loses digits next to 1; work with the
    // upper tail mass there, so F = 1 - upper stays monotone.
    const bool upper_side = lower > Scalar(0.5);
    if (upper_side) detail::fill_upper_moments(u, 2 * J, A.data());
    const Scalar mass = upper_side ? weighted_sum(A.data()) / psi_ : lower;
    F = clamp01(upper_side ? Scalar(1) - mass : mass);
    if (!grad) return;
    // Lower side: dF/dc_r = 2 (sum_s c_s A_{r+s} - F sum_s c_s a_{r+s}) / psi.
    // Upper side: dF/dc_r = 2 ((1 - F) sum_s c_s a_{r+s} - sum_s c_s B_{r+s}) / psi.
    for (int r = 1; r <= J; ++r) {
      Scalar dn = Scalar(0), dpsi = Scalar(0);
      for (int s = 0; s <= J; ++s) {
        dn += coeffs_(s) * A[static_cast<std::size_t>(r + s)];
        dpsi += coeffs_(s) * a_(r + s);
      }
      grad[r - 1] = Scalar(2) * (upper_side ? mass * dpsi - dn : dn - mass * dpsi) / psi_;
    }
  }

 private:
  void init(VectorT<Scalar> c) {
    const int J = static_cast<int>(c.size()) - 1;
    if (J > kMaxHermiteOrder)
      throw ValidationError("Hermite order " + std::to_string(J) + " exceeds the supported maximum " +
                            std::to_string(kMaxHermiteOrder));
    if (!c.allFinite()) throw ValidationError("HermiteDistribution: non-finite coefficients");
    coeffs_ = std::move(c);
    gamma_ = VectorT<Scalar>::Zero(2 * J + 1);
    for (int h = 0; h <= 2 * J; ++h)
      for (int r = std::max(0, h - J); r <= std::min(h, J); ++r) gamma_(h) += coeffs_(r) * coeffs_(h - r);
    a_ = moments_a<Scalar>(2 * J);
    psi_ = gamma_.dot(a_);
    if (!(psi_ > Scalar(0))) throw ValidationError("HermiteDistribution: zero coefficient vector");
  }

  Scalar weighted_sum(const Scalar* A) const {
    Scalar acc = Scalar(0);
    for (Index h = 0; h < gamma_.size(); ++h) acc += gamma_(h) * A[h];
    return acc;
  }

  static Scalar clamp01(Scalar x) { return x < Scalar(0) ? Scalar(0) : (x > Scalar(1) ? Scalar(1) : x); }

  VectorT<Scalar> coeffs_;
  VectorT<Scalar> gamma_;
  VectorT<Scalar> a_;
  Scalar psi_{1};
};

}  // namespace knp
