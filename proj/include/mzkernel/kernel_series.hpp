#pragma once

#include "mzkernel/linalg.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mzkernel {

enum class KernelKind { theta, beta };
std::string_view to_string(KernelKind kind);

/// M x M kernel matrices sampled on an ascending time grid.
struct KernelSeries {
  KernelKind kind = KernelKind::theta;
  std::string source;  // "exact" or "krylov(m)"
  std::string units = "reduced";
  std::vector<double> times;
  std::vector<Matrix> values;
  Index dropped_modes = 0;

  Index size() const { return values.empty() ? 0 : values.front().rows(); }
};

/// n_points equally spaced times covering [0, t_max].
std::vector<double> uniform_grid(double t_max, Index n_points);

/// Throws a grid error unless `times` is nonempty and strictly ascending.
void check_grid(std::span<const double> times);

/// Header "t,theta_1_1,theta_1_2,..." (upper triangle, row-major, 1-based);
/// the lower triangle is mirrored on load.
void write_kernel_csv(const KernelSeries& series, const std::filesystem::path& path);
KernelSeries read_kernel_csv(const std::filesystem::path& path);

nlohmann::json kernel_metadata(const KernelSeries& series);

/// Per-time relative Frobenius error of `approx` against `reference`. The
/// denominator is floored at 1e-12 times the largest reference norm; an
/// identically zero reference gives absolute errors.
std::vector<double> relative_errors(const KernelSeries& approx, const KernelSeries& reference);

/// Max over grid points with t <= t_limit.
double max_error_until(std::span<const double> times, std::span<const double> errors, double t_limit);

struct InvariantReport {
  double max_asymmetry = 0.0;
  double min_eig_theta0 = 0.0;   // theta only
  double max_eig_theta0 = 0.0;
  double min_eig_decay = 0.0;    // min over t of the smallest eigenvalue of theta(0) - theta(t)
  double max_diag_excess = 0.0;  // max over t, i of |theta_ii(t)| - theta_ii(0)
  bool pass = true;
};

/// Symmetry for both kinds; for theta also PSD of theta(0) and of
/// theta(0) - theta(t), and |theta_ii(t)| <= theta_ii(0). Eigenvalue tests use
/// a 1e-10 relative tolerance.
InvariantReport check_invariants(const KernelSeries& series);
nlohmann::json to_json(const InvariantReport& report);

}  // namespace mzkernel
