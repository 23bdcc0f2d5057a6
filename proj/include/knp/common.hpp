#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace knp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Bad input: wrong shapes, out-of-range tuning values, malformed files.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The numerics did not produce a usable answer (solver failure, rank loss).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Scalar>
inline Scalar normal_pdf(Scalar u) {
  using std::exp;
  const Scalar inv_sqrt_2pi = Scalar(0.5) * Scalar(std::numbers::sqrt2) * Scalar(std::numbers::inv_sqrtpi);
  return inv_sqrt_2pi * exp(Scalar(-0.5) * u * u);
}

template <typename Scalar>
inline Scalar normal_cdf(Scalar u) {
  using std::erfc;
  return Scalar(0.5) * erfc(-u / Scalar(std::numbers::sqrt2));
}

}  // namespace knp
