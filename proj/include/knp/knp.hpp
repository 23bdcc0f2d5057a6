#pragma once

#include <cstdint>
#include <string>

#include "knp/common.hpp"
#include "knp/dataset.hpp"
#include "knp/hermite.hpp"
#include "knp/index_solver.hpp"
#include "knp/kernel_gram.hpp"

namespace knp {

enum class WStarPolicy {
  kZeroAfterCentering,  // w* = sample mean of W
  kUserSupplied,        // w* given on the raw covariate scale
};

/// Tuning and solver settings for one KNP fit.
struct FitConfig {
  double B = 10.0;     // RKHS ball radius
  int J = 0;           // Hermite polynomial order
  Index m = 10;        // retained eigenvectors; m = n + 1 means no truncation
  double sigma = 1.0;  // kernel bandwidth on the standardized scale
  WStarPolicy w_star_policy = WStarPolicy::kZeroAfterCentering;
  Vector w_star;       // raw-scale point, used with kUserSupplied
  OptimizerOptions optimizer;
  std::uint64_t seed = 0;

  /// Throws ValidationError for values that are invalid for a sample of size n.
  void validate(Index n, Index d_w) const;
};

struct FitDiagnostics {
  int iterations = 0;
  int best_restart = 0;
  int restarts = 0;
  int restarts_converged = 0;
  bool converged = false;
  double pg_norm = 0.0;
};

/// Fitted estimator. Centers and the normalization point live on the
/// standardized scale; every prediction entry point takes raw covariates.
struct KnpModel {
  KernelSpec<double> kernel;
  Standardization standardization;
  Matrix centers;           // (n+1) x d_w, row 0 = w*
  Vector w_star_raw;
  Vector delta;             // (n+1) kernel coefficients
  Vector zeta;              // effective_m spectral coefficients
  Vector eigenvalues;       // the effective_m retained eigenvalues
  HermiteDistribution<double> dist;
  double B = 0.0;
  Index m_requested = 0;
  Index m_effective = 0;
  double truncation_residual = 0.0;  // next eigenvalue after the retained ones
  double objective = 0.0;            // in-sample least-squares criterion
  FitDiagnostics diagnostics;
  Vector kernel_at_w_star;  // k(center_j, w*), cached

  Index dim() const { return centers.cols(); }
  int hermite_order() const { return dist.order(); }
  /// zeta' Lambda^{-1} zeta, the squared RKHS norm of the fitted element.
  double constraint_value() const;
};

/// Recomputes derived caches (kernel_at_w_star); used after deserialization.
void finalize_model(KnpModel& model);

/// Standardized sample with its gram system. Shared by every fit on the same
/// rows and bandwidth (e.g. across a tuning grid).
struct PreparedSample {
  Dataset data;               // W standardized
  Standardization standardization;
  Vector w_star_raw;
  Vector w_star;              // standardized
  GramSystem<double> gram;
};

PreparedSample prepare_sample(const Dataset& data, const FitConfig& cfg);

KnpModel fit(const Dataset& data, const FitConfig& cfg);
KnpModel fit_prepared(const PreparedSample& sample, const FitConfig& cfg);

/// Least-squares criterion for spectral coefficients zeta: the index of
/// observation i is v_i + [U zeta]_{i+1} - [U zeta]_1 (row 0 of U is w*).
double objective(const Dataset& data, const Matrix& basis, const Vector& zeta, const HermiteDistribution<double>& dist);

struct ObjectiveGradient {
  Vector zeta;
  Vector tau;
};
ObjectiveGradient objective_grad(const Dataset& data, const Matrix& basis, const Vector& zeta,
                                 const HermiteDistribution<double>& dist);

/// g-hat(w) = sum_j delta_j (k(W_j, w) - k(W_j, w*)), raw-scale w.
double predict_g(const KnpModel& model, const Vector& w);
Vector predict_g(const KnpModel& model, const Matrix& w_rows);
/// p-hat(v, w) = F-hat(v + g-hat(w)).
double predict_p(const KnpModel& model, double v, const Vector& w);
Vector predict_p(const KnpModel& model, const Vector& v, const Matrix& w_rows);

/// Comparison of a truncated fit with a reference fit against the bound
/// Q(pc) <= Q(reference) + 4 M B sqrt(lambda_{m+1}).
struct PcBoundReport {
  double pc_objective = 0.0;
  double reference_objective = 0.0;
  double density_sup = 0.0;
  double B = 0.0;
  double residual_eigenvalue = 0.0;
  double allowance = 0.0;  // 4 M B sqrt(lambda_{m+1})
  double slack = 0.0;      // reference + allowance - pc
  bool holds = false;
};

/// Grid supremum of a density on [-10, 10] (4001 points). Stand-in for the
/// uniform density bound of the sieve family.
double density_sup(const HermiteDistribution<double>& dist);

PcBoundReport check_pc_bound(const KnpModel& model, double reference_objective, double density_bound);
PcBoundReport check_pc_bound(const KnpModel& model, const KnpModel& reference);

}  // namespace knp
