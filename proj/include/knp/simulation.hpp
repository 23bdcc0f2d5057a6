#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "knp/knp.hpp"
#include "knp/model_selection.hpp"

namespace knp {

enum class GSpec { I, II, III, IV };
enum class ErrSpec { A, B };

/// Coefficients of the ten-covariate designs.
inline constexpr std::array<double, 10> kDesignBeta{0.63, 0.81, -0.75, 0.83, 0.26, -0.80, -0.44, 0.09, 0.92, 0.93};

struct SimDesign {
  GSpec g = GSpec::I;
  ErrSpec err = ErrSpec::A;
  Index ntrain = 2000;
  Index ntest = 10000;
  int nsim = 50;
  std::uint64_t seed = 0;

  /// "IA", "IIB", ...
  static SimDesign parse(const std::string& name);
  std::string name() const;
  Index d_w() const { return (g == GSpec::I || g == GSpec::II) ? 1 : 10; }
  void validate() const;
};

double true_g(const SimDesign& design, const Vector& w);
double true_F(const SimDesign& design, double u);

struct SimSample {
  Dataset data;
  Vector g_true;  // g0(W_i)
  Vector p_true;  // F0(V_i + g0(W_i))
};

enum class Split { Train, Test };

/// Draws for replication `rep`; (design, split, rep, seed) fixes the sample.
SimSample generate(const SimDesign& design, Split split, int rep);

enum class Method { Probit, KPB, SNP, P2PB, P3PB, P4PB, KNP };

inline constexpr std::array<Method, 7> kAllMethods{Method::Probit, Method::KPB,  Method::SNP, Method::P2PB,
                                                   Method::P3PB,   Method::P4PB, Method::KNP};
std::string method_name(Method m);
Method parse_method(const std::string& name);

struct Metrics {
  double rmse_g = 0.0;
  double mad_g = 0.0;
  double rmse_p = 0.0;
  double mad_p = 0.0;
};

/// RMSE and mean absolute deviation of predictions against truth.
Metrics score(const Vector& g_hat, const Vector& g_true, const Vector& p_hat, const Vector& p_true);

struct MethodOutcome {
  Method method = Method::KNP;
  bool ok = false;
  std::string error;
  Metrics metrics;
  TuningTriple tuning;  // selected (B, J, m); J only for SNP
};

struct SimOptions {
  /// Grid searched for KNP; KPB uses its J = 0 triples and SNP its J > 0
  /// orders.
  std::vector<TuningTriple> grid;
  int folds = 5;
  FitConfig base;  // bandwidth, optimizer, normalization point
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  int threads = 1;
  // Called with every final kernel-method fit; may run on worker threads.
  std::function<void(Method, const KnpModel&)> on_kernel_fit;

  /// Defaults for a design: w* = 0 on the raw scale and a reduced grid.
  static SimOptions defaults(const SimDesign& design);
};

/// Fits every requested method on one replication and scores it on the
/// test draw. Failed fits are reported in the outcome, not thrown.
std::vector<MethodOutcome> run_replication(const SimDesign& design, int rep, const SimOptions& options);

/// Single-method wrapper around run_replication's machinery.
MethodOutcome run_baseline(Method method, const SimSample& train, const SimSample& test, const SimOptions& options,
                           std::uint64_t cv_seed);

struct SimTable {
  SimDesign design;
  std::vector<Method> methods;
  std::vector<std::vector<MethodOutcome>> reps;  // [rep][method]
  std::vector<Metrics> means;                    // per method, over successful reps
  std::vector<int> failures;                     // per method
  double seconds = 0.0;
};

SimTable replicate_table(const SimDesign& design, const SimOptions& options);

/// Table layout: one row per (design, metric), one column per method.
void write_table_csv(std::ostream& out, const std::vector<SimTable>& tables);
/// One row per (rep, method).
void write_reps_csv(std::ostream& out, const SimTable& table);

}  // namespace knp
