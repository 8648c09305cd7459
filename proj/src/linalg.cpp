#include "mzkernel/linalg.hpp"

#include "mzkernel/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>

namespace mzkernel {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_model: return "invalid-model";
    case ErrorCode::invalid_mass: return "invalid-mass";
    case ErrorCode::shape: return "shape";
    case ErrorCode::asymmetry: return "asymmetry";
    case ErrorCode::degenerate_bond: return "degenerate-bond";
    case ErrorCode::partition: return "partition";
    case ErrorCode::empty_basis: return "empty-basis";
    case ErrorCode::size: return "size";
    case ErrorCode::indefinite_hessian: return "indefinite-hessian";
    case ErrorCode::operator_asymmetry: return "operator";
    case ErrorCode::grid: return "grid";
    case ErrorCode::consistency: return "consistency";
    case ErrorCode::policy_refusal: return "policy-refusal";
    case ErrorCode::io: return "io";
    case ErrorCode::config: return "config";
  }
  return "unknown";
}

double max_abs(const Matrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

double max_abs(const SparseMatrix& a) {
  double m = 0.0;
  for (Index k = 0; k < a.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(a, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

double asymmetry(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return (a - a.transpose()).cwiseAbs().maxCoeff();
}

void mirror_upper(Matrix& a) {
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = j + 1; i < a.rows(); ++i) a(i, j) = a(j, i);
}

SymmetricEigen symmetric_eigen(const Matrix& a) {
  if (a.rows() == 0) return {};
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorCode::consistency, "symmetric eigensolver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

namespace {

void project_out(Eigen::Ref<Vector> v, const Matrix& basis, Index count) {
  for (Index k = 0; k < count; ++k) v -= basis.col(k).dot(v) * basis.col(k);
}

}  // namespace

OrthonormalizeResult orthonormalize_columns(const Matrix& candidates, const Matrix& against,
                                            double drop_tol) {
  const Index n = candidates.rows();
  if (against.size() != 0 && against.rows() != n)
    throw Error(ErrorCode::shape, "orthonormalization operands have different row counts");
  const Index fixed = against.size() == 0 ? 0 : against.cols();

  Matrix work(n, fixed + candidates.cols());
  if (fixed > 0) work.leftCols(fixed) = against;
  Index accepted = 0;
  Index dropped = 0;
  for (Index c = 0; c < candidates.cols(); ++c) {
    Vector v = candidates.col(c);
    const double before = v.norm();
    for (int pass = 0; pass < 2; ++pass) project_out(v, work, fixed + accepted);
    const double after = v.norm();
    if (before == 0.0 || !(after > drop_tol * before)) {
      ++dropped;
      continue;
    }
    work.col(fixed + accepted) = v / after;
    ++accepted;
  }
  return {work.middleCols(fixed, accepted), dropped};
}

OrthonormalizeResult orthonormalize_columns(const Matrix& candidates, double drop_tol) {
  return orthonormalize_columns(candidates, Matrix(), drop_tol);
}

LinearOperator dense_operator(Matrix a) {
  auto shared = std::make_shared<const Matrix>(std::move(a));
  const Index n = shared->rows();
  return LinearOperator(n, [shared](const Matrix& x) -> Matrix { return (*shared) * x; });
}

LinearOperator sparse_operator(SparseMatrix a) {
  auto shared = std::make_shared<const SparseMatrix>(std::move(a));
  const Index n = shared->rows();
  return LinearOperator(n, [shared](const Matrix& x) -> Matrix { return (*shared) * x; });
}

double symmetry_defect(const LinearOperator& op, int probes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const Index n = op.dim();
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    Matrix xy(n, 2);
    for (Index i = 0; i < xy.size(); ++i) xy.data()[i] = normal(rng);
    const Matrix a = op(xy);
    const double lhs = xy.col(0).dot(a.col(1));
    const double rhs = a.col(0).dot(xy.col(1));
    const double scale = xy.col(0).norm() * a.col(1).norm() + a.col(0).norm() * xy.col(1).norm();
    if (scale > 0.0) worst = std::max(worst, std::abs(lhs - rhs) / scale);
  }
  return worst;
}

}  // namespace mzkernel
