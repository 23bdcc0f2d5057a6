#include "knp/kernel_gram.hpp"

#include <atomic>
#include <cstdio>
#include <random>

#ifdef KNP_HAVE_LAPACKE
#include <lapacke.h>
#endif

namespace knp::detail {

namespace {

void eigen_solve(const Matrix& a, Vector& values, Matrix& vectors) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  if (es.info() != Eigen::Success) throw NumericalError("symmetric eigendecomposition failed");
  values = es.eigenvalues();
  vectors = es.eigenvectors();
}

#ifdef KNP_HAVE_LAPACKE
// Two random probes: V diag(values) V' x = A x and V'V x = x. Catches a
// broken BLAS/LAPACK build at O(n^2) cost.
bool decomposition_ok(const Matrix& a, const Vector& values, const Matrix& vectors) {
  if (!values.allFinite() || !vectors.allFinite()) return false;
  std::mt19937_64 rng(0x6b6e70u);
  std::normal_distribution<double> z;
  Vector x(a.rows());
  for (Index i = 0; i < x.size(); ++i) x(i) = z(rng);
  const Vector vx = vectors.transpose() * x;
  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff()) * x.norm();
  const double recon = (vectors * values.cwiseProduct(vx) - a * x).norm();
  const double orth = (vectors * vx - x).norm();
  const double tol = 1e-8 * std::sqrt(static_cast<double>(a.rows()));
  return recon <= tol * scale && orth <= tol * x.norm();
}
#endif

}  // namespace

void symmetric_eigen(const Matrix& a, Vector& values, Matrix& vectors) {
#ifdef KNP_HAVE_LAPACKE
  static std::atomic<bool> lapack_broken{false};
  if (!lapack_broken.load()) {
    const auto n = static_cast<lapack_int>(a.rows());
    vectors = a;
    values.resize(a.rows());
    const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, vectors.data(), n, values.data());
    if (info == 0 && decomposition_ok(a, values, vectors)) return;
    if (!lapack_broken.exchange(true))
      std::fprintf(stderr,
                   "knp: LAPACK eigensolver returned an inaccurate decomposition; falling back to Eigen. "
                   "With OpenBLAS, setting OPENBLAS_CORETYPE (e.g. Haswell) usually fixes this.\n");
  }
#endif
  eigen_solve(a, values, vectors);
}

}  // namespace knp::detail
