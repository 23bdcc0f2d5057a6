#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "knp/common.hpp"

namespace knp {

/// Gaussian kernel k(u, v) = exp(-|u - v|^2 / (2 bandwidth^2)).
template <typename Scalar = double>
class KernelSpec {
 public:
  explicit KernelSpec(Scalar bandwidth = Scalar(1)) : bandwidth_(bandwidth) {
    if (!(bandwidth > Scalar(0)) || !std::isfinite(static_cast<double>(bandwidth)))
      throw ValidationError("kernel bandwidth must be positive and finite");
  }

  Scalar bandwidth() const { return bandwidth_; }

  /// Kernel value from a squared distance.
  Scalar from_sq_dist(Scalar sq) const {
    using std::exp;
    return exp(-sq / (Scalar(2) * bandwidth_ * bandwidth_));
  }

 private:
  Scalar bandwidth_;
};

template <typename Scalar, typename DerivedU, typename DerivedV>
Scalar kernel_eval(const KernelSpec<Scalar>& spec, const Eigen::MatrixBase<DerivedU>& u,
                   const Eigen::MatrixBase<DerivedV>& v) {
  if (u.size() != v.size()) throw ValidationError("kernel_eval: dimension mismatch");
  return spec.from_sq_dist((u.derived().reshaped() - v.derived().reshaped()).squaredNorm());
}

/// Gradient of k(center, w) with respect to w.
template <typename Scalar, typename DerivedC, typename DerivedW>
VectorT<Scalar> kernel_grad(const KernelSpec<Scalar>& spec, const Eigen::MatrixBase<DerivedC>& center,
                            const Eigen::MatrixBase<DerivedW>& w) {
  if (center.size() != w.size()) throw ValidationError("kernel_grad: dimension mismatch");
  const VectorT<Scalar> diff = w.derived().reshaped() - center.derived().reshaped();
  const Scalar h2 = spec.bandwidth() * spec.bandwidth();
  return -(diff / h2) * spec.from_sq_dist(diff.squaredNorm());
}

/// Kernel matrix between the rows of `a` and the rows of `b`.
template <typename Scalar>
MatrixT<Scalar> cross_gram(const KernelSpec<Scalar>& spec, const MatrixT<Scalar>& a, const MatrixT<Scalar>& b) {
  if (a.cols() != b.cols()) throw ValidationError("cross_gram: dimension mismatch");
  MatrixT<Scalar> out(a.rows(), b.rows());
  for (Index j = 0; j < b.rows(); ++j)
    for (Index i = 0; i < a.rows(); ++i) out(i, j) = spec.from_sq_dist((a.row(i) - b.row(j)).squaredNorm());
  return out;
}

namespace detail {

/// Dense symmetric eigendecomposition, eigenvalues ascending. The double
/// overload goes through LAPACK (dsyevd) when available.
void symmetric_eigen(const Matrix& a, Vector& values, Matrix& vectors);

template <typename Scalar>
void symmetric_eigen(const MatrixT<Scalar>& a, VectorT<Scalar>& values, MatrixT<Scalar>& vectors) {
  Eigen::SelfAdjointEigenSolver<MatrixT<Scalar>> es(a);
  if (es.info() != Eigen::Success) throw NumericalError("symmetric eigendecomposition failed");
  values = es.eigenvalues();
  vectors = es.eigenvectors();
}

}  // namespace detail

/// Relative eigenvalue floor below which a direction is treated as null.
inline constexpr double kRankTolerance = 1e-12;

/// Gram matrix over the centers {w*, W_1, ..., W_n} with its full
/// eigendecomposition. Row/column 0 is the normalization point.
template <typename Scalar = double>
class GramSystem {
 public:
  GramSystem(KernelSpec<Scalar> spec, MatrixT<Scalar> centers, MatrixT<Scalar> gram, VectorT<Scalar> eigenvalues,
             MatrixT<Scalar> eigenvectors)
      : spec_(spec),
        centers_(std::move(centers)),
        gram_(std::move(gram)),
        eigenvalues_(std::move(eigenvalues)),
        eigenvectors_(std::move(eigenvectors)) {
    const Scalar top = eigenvalues_.size() > 0 ? std::max(eigenvalues_(0), Scalar(0)) : Scalar(0);
    effective_rank_ = 0;
    for (Index j = 0; j < eigenvalues_.size(); ++j)
      if (eigenvalues_(j) > Scalar(kRankTolerance) * top) ++effective_rank_;
  }

  const KernelSpec<Scalar>& kernel() const { return spec_; }
  const MatrixT<Scalar>& centers() const { return centers_; }
  const MatrixT<Scalar>& gram() const { return gram_; }
  /// Descending; round-off negatives are kept here and clamped by truncate().
  const VectorT<Scalar>& eigenvalues() const { return eigenvalues_; }
  const MatrixT<Scalar>& eigenvectors() const { return eigenvectors_; }
  Index size() const { return gram_.rows(); }
  Index dim() const { return centers_.cols(); }
  /// Number of eigenvalues above kRankTolerance * largest.
  Index effective_rank() const { return effective_rank_; }

 private:
  KernelSpec<Scalar> spec_;
  MatrixT<Scalar> centers_;
  MatrixT<Scalar> gram_;
  VectorT<Scalar> eigenvalues_;
  MatrixT<Scalar> eigenvectors_;
  Index effective_rank_ = 0;
};

/// Builds the augmented gram over [w_star; W] (one point per row).
template <typename Scalar>
GramSystem<Scalar> build_gram(const KernelSpec<Scalar>& spec, const VectorT<Scalar>& w_star,
                              const MatrixT<Scalar>& W) {
  if (W.rows() < 1) throw ValidationError("build_gram: need at least one point");
  if (w_star.size() != W.cols()) throw ValidationError("build_gram: w_star dimension does not match W");
  if (!w_star.allFinite() || !W.allFinite()) throw ValidationError("build_gram: non-finite coordinates");

  const Index n1 = W.rows() + 1;
  MatrixT<Scalar> centers(n1, W.cols());
  centers.row(0) = w_star.transpose();
  centers.bottomRows(W.rows()) = W;

  MatrixT<Scalar> K(n1, n1);
  for (Index j = 0; j < n1; ++j) {
    K(j, j) = Scalar(1);
    for (Index i = j + 1; i < n1; ++i) {
      const Scalar v = spec.from_sq_dist((centers.row(i) - centers.row(j)).squaredNorm());
      K(i, j) = v;
      K(j, i) = v;
    }
  }

  VectorT<Scalar> asc;
  MatrixT<Scalar> vecs;
  detail::symmetric_eigen(K, asc, vecs);

  // Descending order, ties kept in solver order.
  std::vector<Index> order(static_cast<std::size_t>(n1));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return asc(a) > asc(b); });

  VectorT<Scalar> values(n1);
  MatrixT<Scalar> vectors(n1, n1);
  for (Index j = 0; j < n1; ++j) {
    const Index src = order[static_cast<std::size_t>(j)];
    values(j) = asc(src);
    auto col = vecs.col(src);
    // Sign convention: the largest-magnitude entry is positive.
    Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    vectors.col(j) = col(arg) < Scalar(0) ? VectorT<Scalar>(-col) : VectorT<Scalar>(col);
  }
  return GramSystem<Scalar>(spec, std::move(centers), std::move(K), std::move(values), std::move(vectors));
}

/// Leading-m spectral truncation of a gram system.
template <typename Scalar = double>
struct Truncation {
  MatrixT<Scalar> basis;      // (n+1) x m leading eigenvectors
  VectorT<Scalar> values;     // m leading eigenvalues, clamped at 0
  Scalar residual{0};         // next eigenvalue (0 when m = n+1)
  Index effective_m{0};       // leading columns whose eigenvalue clears the rank floor
};

template <typename Scalar>
Truncation<Scalar> truncate(const GramSystem<Scalar>& g, Index m) {
  const Index n1 = g.size();
  if (m < 1 || m > n1)
    throw ValidationError("truncate: m = " + std::to_string(m) + " outside [1, " + std::to_string(n1) + "]");
  Truncation<Scalar> t;
  t.basis = g.eigenvectors().leftCols(m);
  t.values = g.eigenvalues().head(m).cwiseMax(Scalar(0));
  t.residual = m < n1 ? std::max(g.eigenvalues()(m), Scalar(0)) : Scalar(0);
  t.effective_m = std::min(m, g.effective_rank());
  return t;
}

}  // namespace knp
