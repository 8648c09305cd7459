#pragma once

#include "mzkernel/basis.hpp"
#include "mzkernel/kernel_series.hpp"
#include "mzkernel/model.hpp"

#include <optional>
#include <span>
#include <vector>

namespace mzkernel {

/// Largest dimension for which the dense oracle runs.
inline constexpr Index kDenseOracleLimit = 2000;

inline constexpr double kDefaultNullThreshold = 1e-10;

/// Throws policy-refusal when `dim` exceeds kDenseOracleLimit.
void check_dense_oracle_policy(Index dim);

/// Orthonormal basis Psi (dim x (dim - M)) of the orthogonal complement of span(Phi).
Matrix build_complement(const CGBasis& basis);

/// Eigendecomposition of A_hat = Psi^T A Psi and the couplings c_i = Phi^T A Psi w_i.
struct ComplementSpectrum {
  Matrix psi;
  Vector lambdas;   // ascending, all modes
  Matrix w;         // eigenvectors of A_hat
  Matrix coupling;  // M x (dim - M), column i is c_i
  std::vector<Index> dropped_modes;
  double null_cutoff = 0.0;  // eps_lambda actually used

  Vector retained_eigenvalues() const;
  Matrix retained_coupling() const;
};

/// Modes with lambda <= null_threshold * max(lambda_max, max|A|) are dropped;
/// a retained negative eigenvalue is an indefinite-hessian error.
ComplementSpectrum compute_spectrum(const HessianModel& model, const CGBasis& basis,
                                    double null_threshold = kDefaultNullThreshold);
ComplementSpectrum compute_spectrum(const Matrix& a, const CGBasis& basis,
                                    double null_threshold = kDefaultNullThreshold);

KernelSeries theta_exact(const ComplementSpectrum& spectrum, std::span<const double> times);
KernelSeries beta_exact(const ComplementSpectrum& spectrum, std::span<const double> times);

/// Max entrywise residual of A^{-1} Phi (Phi^T A^{-1} Phi)^{-1} = Phi - Psi (Psi^T A Psi)^{-1} Psi^T A Phi.
/// Returns nullopt when A or Psi^T A Psi is numerically singular.
std::optional<double> matrix_identity_residual(const Matrix& a, const Matrix& phi);
std::optional<double> verify_matrix_identity(const HessianModel& model, const CGBasis& basis);

}  // namespace mzkernel
