#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "knp/knp.hpp"

namespace knp {

struct TuningTriple {
  double B = 10.0;
  int J = 0;
  Index m = 10;

  friend bool operator==(const TuningTriple&, const TuningTriple&) = default;
};

/// Lexicographic order on (m, J, B); used to break score ties.
bool tie_break_less(const TuningTriple& a, const TuningTriple& b);

struct CvPlan {
  int folds = 5;
  std::vector<TuningTriple> grid;
  std::uint64_t seed = 0;

  /// B in {1, 3, 10, 30}, J in {0, 2, 4, 6}, m in {10, 25, 50, min(100, n)}.
  static std::vector<TuningTriple> default_grid(Index n);
  /// Throws ValidationError for an unusable plan on a sample of size n.
  void validate(Index n) const;
};

struct CvRow {
  TuningTriple triple;
  std::vector<double> fold_scores;  // held-out mean squared error of p-hat
  double mean = std::numeric_limits<double>::infinity();
  bool failed = false;
  std::string note;  // first failure message, if any
};

struct CvResult {
  TuningTriple best;
  double best_score = std::numeric_limits<double>::infinity();
  std::vector<CvRow> table;               // in grid order
  std::vector<std::vector<Index>> folds;  // held-out rows of each fold
};

/// Lowest-scoring unflagged row among the allowed triples (nullptr if none).
/// Scores within 1e-10 relative of the minimum are tied and resolved by
/// tie_break_less.
const CvRow* select_best(const std::vector<CvRow>& table, const std::function<bool(const TuningTriple&)>& allowed);

/// Seeded partition of 0..n-1 into k folds of near-equal size.
std::vector<std::vector<Index>> make_folds(Index n, int k, std::uint64_t seed);

/// k-fold cross-validation of (B, J, m) with every other setting taken from
/// base. Standardization and the gram matrix are rebuilt on each training
/// split. A triple whose fit fails on any fold scores +inf and is flagged.
CvResult cross_validate(const Dataset& data, const CvPlan& plan, const FitConfig& base, int threads = 1);

/// Columns: B, J, m, fold_1..fold_k, mean, failed.
void write_cv_csv(std::ostream& out, const CvResult& result);

}  // namespace knp
