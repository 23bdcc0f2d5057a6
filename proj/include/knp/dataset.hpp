#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "knp/common.hpp"

namespace knp {

/// Binary-choice sample: outcome y, large-support regressor v, remaining
/// covariates w (one observation per row).
struct Dataset {
  Vector y;
  Vector v;
  Matrix w;
  std::vector<std::string> w_names;  // column labels, defaults w1..wd

  Index size() const { return v.size(); }
  Index dim() const { return w.cols(); }

  /// Rows selected by index, in the given order (duplicates allowed).
  Dataset subset(const std::vector<Index>& rows) const;
};

/// Builds a dataset and fills default column names.
Dataset make_dataset(Vector y, Vector v, Matrix w);

/// Throws ValidationError unless the sample can be used for estimation:
/// n >= 10, y in {0,1} and not constant, all values finite.
void validate_for_fit(const Dataset& data);

/// Column-wise centering/scaling of w.
struct Standardization {
  Vector mean;
  Vector scale;               // 1 for constant columns
  std::vector<bool> constant; // flagged degenerate columns

  Vector apply(const Vector& w_raw) const;
  Matrix apply_rows(const Matrix& w_raw) const;
  Vector invert(const Vector& w_std) const;
  bool any_constant() const;
};

/// Centers each w column and scales it to unit sample variance. Constant
/// columns are only centered and flagged. y and v are untouched.
std::pair<Dataset, Standardization> standardize(const Dataset& data);

/// CSV with header `y,v,<w columns...>`; comma separated, '.' decimal.
Dataset read_csv(std::istream& in);
Dataset read_csv_file(const std::string& path);
void write_csv(std::ostream& out, const Dataset& data);

}  // namespace knp
