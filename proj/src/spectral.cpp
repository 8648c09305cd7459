#include "mzkernel/spectral.hpp"

#include "mzkernel/parallel.hpp"

#include <cmath>

namespace mzkernel {

Matrix weighted_outer_sum(const Matrix& coupling, const Vector& weights) {
  Matrix out = (coupling * weights.asDiagonal()) * coupling.transpose();
  mirror_upper(out);
  return out;
}

KernelSeries evaluate_spectral_kernel(KernelKind kind, const Matrix& coupling, const Vector& eigenvalues,
                                      std::span<const double> times) {
  check_grid(times);
  KernelSeries series;
  series.kind = kind;
  series.times.assign(times.begin(), times.end());
  series.values.resize(times.size());
  const Vector freq = eigenvalues.cwiseSqrt();
  parallel_for(times.size(), [&](std::size_t k) {
    const double t = times[k];
    Vector w(eigenvalues.size());
    for (Index i = 0; i < w.size(); ++i) {
      w(i) = kind == KernelKind::theta ? std::cos(freq(i) * t) / eigenvalues(i) : std::sin(freq(i) * t) / freq(i);
    }
    series.values[k] = weighted_outer_sum(coupling, w);
  });
  return series;
}

}  // namespace mzkernel
