#pragma once

#include "mzkernel/kernel_series.hpp"
#include "mzkernel/linalg.hpp"

#include <span>

namespace mzkernel {

/// Sum over modes i of w_i c_i c_i^T, where c_i are the columns of
/// `coupling`. The upper triangle is computed and mirrored, so the result is
/// exactly symmetric.
Matrix weighted_outer_sum(const Matrix& coupling, const Vector& weights);

/// Evaluates theta(t) = sum cos(sqrt(l) t)/l c c^T or
/// beta(t) = sum sin(sqrt(l) t)/sqrt(l) c c^T on every grid point. All
/// eigenvalues passed in must be positive.
KernelSeries evaluate_spectral_kernel(KernelKind kind, const Matrix& coupling, const Vector& eigenvalues,
                                      std::span<const double> times);

}  // namespace mzkernel
