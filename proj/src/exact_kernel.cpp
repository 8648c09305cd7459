#include "mzkernel/exact_kernel.hpp"

#include "mzkernel/error.hpp"
#include "mzkernel/io.hpp"
#include "mzkernel/spectral.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace mzkernel {

namespace {

Matrix complement_of(const Matrix& phi) {
  const Index n = phi.rows();
  const Index m = phi.cols();
  if (m == n) return Matrix(n, 0);
  Eigen::HouseholderQR<Matrix> qr(phi);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  Matrix psi = q.rightCols(n - m);

  const double leak = max_abs(Matrix(phi.transpose() * psi));
  const double gram = max_abs(Matrix(psi.transpose() * psi - Matrix::Identity(n - m, n - m)));
  if (leak > 1e-10 || gram > 1e-10)
    throw Error(ErrorCode::consistency, "complement basis lost orthogonality (Phi^T Psi " + io::format_double(leak) +
                                            ", Psi^T Psi - I " + io::format_double(gram) + ")");
  return psi;
}

bool nearly_singular(const Vector& eigenvalues) {
  if (eigenvalues.size() == 0) return false;
  const double largest = eigenvalues.cwiseAbs().maxCoeff();
  return eigenvalues.cwiseAbs().minCoeff() <= 1e-12 * largest;
}

}  // namespace

void check_dense_oracle_policy(Index dim) {
  if (dim > kDenseOracleLimit)
    throw Error(ErrorCode::policy_refusal, "dense oracle is limited to dimension " + std::to_string(kDenseOracleLimit) +
                                               "; this system has dimension " + std::to_string(dim));
}

Matrix build_complement(const CGBasis& basis) { return complement_of(basis.phi()); }

Vector ComplementSpectrum::retained_eigenvalues() const {
  Vector out(lambdas.size() - static_cast<Index>(dropped_modes.size()));
  Index k = 0;
  std::size_t d = 0;
  for (Index i = 0; i < lambdas.size(); ++i) {
    if (d < dropped_modes.size() && dropped_modes[d] == i) {
      ++d;
      continue;
    }
    out(k++) = lambdas(i);
  }
  return out;
}

Matrix ComplementSpectrum::retained_coupling() const {
  Matrix out(coupling.rows(), lambdas.size() - static_cast<Index>(dropped_modes.size()));
  Index k = 0;
  std::size_t d = 0;
  for (Index i = 0; i < lambdas.size(); ++i) {
    if (d < dropped_modes.size() && dropped_modes[d] == i) {
      ++d;
      continue;
    }
    out.col(k++) = coupling.col(i);
  }
  return out;
}

ComplementSpectrum compute_spectrum(const HessianModel& model, const CGBasis& basis, double null_threshold) {
  check_dense_oracle_policy(model.dim());
  return compute_spectrum(model.dense_A(), basis, null_threshold);
}

ComplementSpectrum compute_spectrum(const Matrix& a, const CGBasis& basis, double null_threshold) {
  if (a.rows() != basis.dim() || a.cols() != basis.dim())
    throw Error(ErrorCode::shape, "matrix and basis dimensions differ");
  check_dense_oracle_policy(a.rows());

  ComplementSpectrum s;
  s.psi = build_complement(basis);
  const Matrix a_psi = a * s.psi;
  Matrix a_hat = s.psi.transpose() * a_psi;
  mirror_upper(a_hat);
  auto eig = symmetric_eigen(a_hat);
  s.lambdas = std::move(eig.values);
  s.w = std::move(eig.vectors);
  s.coupling = ((a * basis.phi()).transpose() * s.psi) * s.w;

  const double lambda_max = s.lambdas.size() > 0 ? s.lambdas.maxCoeff() : 0.0;
  s.null_cutoff = null_threshold * std::max(lambda_max, max_abs(a));
  for (Index i = 0; i < s.lambdas.size(); ++i) {
    if (s.lambdas(i) < -s.null_cutoff)
      throw Error(ErrorCode::indefinite_hessian,
                  "complement eigenvalue " + io::format_double(s.lambdas(i)) + " is negative beyond the null threshold");
    if (s.lambdas(i) <= s.null_cutoff) s.dropped_modes.push_back(i);
  }
  return s;
}

KernelSeries theta_exact(const ComplementSpectrum& spectrum, std::span<const double> times) {
  auto series = evaluate_spectral_kernel(KernelKind::theta, spectrum.retained_coupling(),
                                         spectrum.retained_eigenvalues(), times);
  series.source = "exact";
  series.dropped_modes = static_cast<Index>(spectrum.dropped_modes.size());
  return series;
}

KernelSeries beta_exact(const ComplementSpectrum& spectrum, std::span<const double> times) {
  auto series = evaluate_spectral_kernel(KernelKind::beta, spectrum.retained_coupling(),
                                         spectrum.retained_eigenvalues(), times);
  series.source = "exact";
  series.dropped_modes = static_cast<Index>(spectrum.dropped_modes.size());
  return series;
}

std::optional<double> matrix_identity_residual(const Matrix& a, const Matrix& phi) {
  if (a.rows() != a.cols() || a.rows() != phi.rows()) throw Error(ErrorCode::shape, "matrix identity operands disagree");
  const auto eig_a = symmetric_eigen(a);
  if (nearly_singular(eig_a.values)) return std::nullopt;

  const Matrix a_inv_phi = a.ldlt().solve(phi);
  const Matrix schur = phi.transpose() * a_inv_phi;
  const Matrix lhs = a_inv_phi * schur.lu().solve(Matrix::Identity(phi.cols(), phi.cols()));

  const Matrix psi = complement_of(phi);
  Matrix rhs = phi;
  if (psi.cols() > 0) {
    const Matrix a_hat = psi.transpose() * a * psi;
    if (nearly_singular(symmetric_eigen(a_hat).values)) return std::nullopt;
    rhs -= psi * a_hat.ldlt().solve(psi.transpose() * a * phi);
  }
  return max_abs(Matrix(lhs - rhs));
}

std::optional<double> verify_matrix_identity(const HessianModel& model, const CGBasis& basis) {
  check_dense_oracle_policy(model.dim());
  return matrix_identity_residual(model.dense_A(), basis.phi());
}

}  // namespace mzkernel
