#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "knp/knp.hpp"

namespace knp {

/// Gradient of p-hat at x = (v, w): entry 0 is d/dv, entries 1..d_w are
/// d/dw_j on the raw covariate scale.
Vector ccp_gradient(const KnpModel& model, double v, const Vector& w);

/// Coordinate index into x = (v, w) for a column name ("v" or a w label).
Index coordinate_index(const Dataset& data, const std::string& name);

/// Sample mean of the j-th gradient entry over the rows of data.
double ape(const KnpModel& model, const Dataset& data, Index j, int threads = 1);

/// Subset of the covariate space x = (v, w).
struct Region {
  std::string description;
  std::function<bool(double v, const Vector& w)> contains;

  Region complement() const;
};

/// Parses comparisons such as "w3>70" or "v<=0 && w1>1" against the data's
/// column names. Supported operators: < <= > >= == !=.
Region parse_region(const std::string& expr, const Dataset& data);

/// Average of the j-th gradient entry over the rows that fall in S. Throws
/// ValidationError naming S when no row does.
double conditional_ape(const KnpModel& model, const Dataset& data, Index j, const Region& S, int threads = 1);

/// Share of rows in S.
double region_frequency(const Dataset& data, const Region& S);

/// Draws x_k from a known proposal density q together with q(x_k).
struct IntegrationSample {
  Vector v;
  Matrix w;
  Vector density;
};

/// Uniform draws on the box [lo, hi] in (v, w) coordinates.
IntegrationSample uniform_box_sample(const Vector& lo, const Vector& hi, Index count, std::uint64_t seed);

struct WeightedDerivative {
  double estimate = 0.0;
  double std_error = 0.0;
  Index n_used = 0;
  bool support_warning = false;
  std::string warning;
};

/// Importance-sampling estimate of int b(x) dp-hat/dx_j dx, averaging
/// b(x_k) / q(x_k) * dp-hat/dx_j(x_k). When `support` is given, points with
/// b > 0 outside its coordinate-wise range raise the support warning.
WeightedDerivative weighted_avg_derivative(const KnpModel& model, Index j,
                                           const std::function<double(double, const Vector&)>& b,
                                           const IntegrationSample& sample, const Dataset* support = nullptr);

}  // namespace knp
