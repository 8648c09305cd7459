#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <cstdint>
#include <functional>
#include <memory>

namespace mzkernel {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, Index>;

double max_abs(const Matrix& a);
double max_abs(const SparseMatrix& a);

/// Largest entrywise |a - a^T|.
double asymmetry(const Matrix& a);

/// Copies the upper triangle onto the lower one so the result is exactly symmetric.
void mirror_upper(Matrix& a);

struct SymmetricEigen {
  Vector values;  // ascending
  Matrix vectors;
};

SymmetricEigen symmetric_eigen(const Matrix& a);

struct OrthonormalizeResult {
  Matrix columns;
  Index dropped = 0;
};

/// Modified Gram-Schmidt with one full re-pass. A candidate is dropped when
/// its norm after projection falls below `drop_tol` times its norm before
/// projection (zero candidates are always dropped).
OrthonormalizeResult orthonormalize_columns(const Matrix& candidates, double drop_tol = 1e-8);

/// Same as above, but every candidate is first made orthogonal to the
/// orthonormal columns of `against`.
OrthonormalizeResult orthonormalize_columns(const Matrix& candidates, const Matrix& against,
                                            double drop_tol);

/// A symmetric linear map applied to blocks of column vectors.
class LinearOperator {
 public:
  using Apply = std::function<Matrix(const Matrix&)>;

  LinearOperator(Index dim, Apply apply) : dim_(dim), apply_(std::move(apply)) {}

  Index dim() const { return dim_; }
  Matrix operator()(const Matrix& x) const { return apply_(x); }

 private:
  Index dim_;
  Apply apply_;
};

LinearOperator dense_operator(Matrix a);
LinearOperator sparse_operator(SparseMatrix a);

/// Samples <x, Ay> - <Ax, y> on deterministic pseudo-random vectors and
/// returns the largest relative discrepancy observed.
double symmetry_defect(const LinearOperator& op, int probes = 2, std::uint64_t seed = 0x5eed);

}  // namespace mzkernel
