#pragma once

#include <cstdint>
#include <optional>

#include "knp/common.hpp"
#include "knp/hermite.hpp"

namespace knp {

struct OptimizerOptions {
  int max_iters = 2000;
  double grad_tol = 1e-7;  // on the projected gradient, sup norm
  int n_restarts = 5;
  int memory = 10;         // L-BFGS pairs
};

/// Euclidean projection of z onto {x : sum_j c_j x_j^2 <= radius^2}, c_j > 0.
/// Solves for the Lagrange multiplier by safeguarded Newton iteration.
Vector project_ellipsoid(const Vector& z, const Vector& weights, double radius);

/// Least-squares single-index binary-choice criterion
///   Q(beta, tau) = (1/n) sum_i (y_i - F(offset_i + [D beta]_i; tau))^2
/// with F in the squared-Hermite family of a fixed order and an optional
/// ellipsoidal constraint on beta.
class IndexProblem {
 public:
  IndexProblem(Vector y, Vector offset, Matrix design, int hermite_order);

  void set_ellipsoid(Vector weights, double radius);
  bool constrained() const { return weights_.has_value(); }
  const Vector& weights() const { return *weights_; }
  double radius() const { return radius_; }

  Index n() const { return y_.size(); }
  Index p() const { return design_.cols(); }
  int hermite_order() const { return order_; }
  const Matrix& design() const { return design_; }

  Vector index(const Vector& beta) const { return offset_ + design_ * beta; }
  double objective(const Vector& beta, const Vector& tau) const;
  /// Objective with gradients written to g_beta (size p) and g_tau (size J).
  double objective_and_gradient(const Vector& beta, const Vector& tau, Vector& g_beta, Vector& g_tau) const;
  Vector project(const Vector& beta) const;
  /// Gauss-Newton matrix (2/n) J'J of the criterion in (beta, tau).
  Matrix gauss_newton(const Vector& beta, const Vector& tau) const;

 private:
  Vector y_;
  Vector offset_;
  Matrix design_;
  int order_;
  std::optional<Vector> weights_;
  double radius_ = 0.0;
};

struct SolveResult {
  Vector beta;
  Vector tau;
  double objective = 0.0;
  double pg_norm = 0.0;   // projected-gradient sup norm at the solution
  int iterations = 0;
  bool converged = false;
  int restart = 0;        // which start produced this result
  int restarts_converged = 0;
};

/// Quasi-Newton minimization from one start. Constrained problems use a dense
/// BFGS model whose step is the model minimizer over the ellipsoid (found by
/// root-finding on the Lagrange multiplier); unconstrained problems use
/// L-BFGS. tau is never constrained.
SolveResult minimize(const IndexProblem& problem, Vector beta0, Vector tau0, const OptimizerOptions& options);

/// Best of options.n_restarts starts: start 0 is (beta = 0, tau = 0), the
/// rest draw beta uniformly in the constraint ellipsoid (or in
/// [-0.5, 0.5]^p when unconstrained) and tau in [-0.5, 0.5]^J.
SolveResult minimize_multistart(const IndexProblem& problem, const OptimizerOptions& options, std::uint64_t seed);

}  // namespace knp
