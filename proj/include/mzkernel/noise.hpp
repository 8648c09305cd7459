#pragma once

#include "mzkernel/krylov_kernel.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace mzkernel {

/// Seed of the random stream for sample `index`; a pure function of its
/// arguments so samples can be drawn in any order.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index);

/// Draws the stationary Gaussian noise R(t) living in the Krylov space of a
/// factorization. Independent modal amplitudes xi_i ~ N(0, kBT/mu_i) and
/// eta_i ~ N(0, kBT) are combined as
///   R(t) = sum_i [cos(sqrt(mu_i) t) xi_i + sin(sqrt(mu_i) t) eta_i / sqrt(mu_i)] g_i,
/// g_i the retained columns of the evaluator coupling.
class NoiseSampler {
 public:
  NoiseSampler(const KrylovKernelEvaluator& evaluator, double kbt, std::uint64_t seed);

  double kbt() const { return kbt_; }
  std::uint64_t seed() const { return seed_; }
  Index size() const { return coupling_.rows(); }
  Index modes() const { return mu_.size(); }
  const std::string& fingerprint() const { return fingerprint_; }

  /// One trajectory on `times`, as a times.size() x M matrix.
  Matrix trajectory(std::span<const double> times, std::uint64_t sample) const;

 private:
  Vector mu_;
  Matrix coupling_;
  double kbt_;
  std::uint64_t seed_;
  std::string fingerprint_;
};

struct NoiseEnsemble {
  std::vector<double> times;
  std::vector<Matrix> samples;  // each times.size() x M
  std::uint64_t seed = 0;
  double kbt = 0.0;
  std::string fingerprint;

  Index count() const { return static_cast<Index>(samples.size()); }
  Index size() const { return samples.empty() ? 0 : samples.front().cols(); }
};

NoiseEnsemble sample_trajectories(const NoiseSampler& sampler, std::span<const double> times, Index count);

using TimePair = std::pair<double, double>;

struct CovarianceEstimate {
  TimePair times;
  Matrix mean;       // (1/S) sum_s R_s(t_i) R_s(t_j)^T
  Matrix std_error;  // per-entry standard error of the mean
};

/// Throws a grid error for times not on the ensemble grid, and a config
/// error for fewer than two samples.
std::vector<CovarianceEstimate> empirical_covariance(const NoiseEnsemble& ensemble, std::span<const TimePair> pairs);

/// For every lag, pairs (s + lag, s) at s = 0, the middle and the end of the
/// admissible range, snapped to the grid.
std::vector<TimePair> lag_pairs(std::span<const double> times, std::span<const double> lags);

struct FdtCriteria {
  double z_limit = 4.0;
  double pass_fraction = 0.99;
  Index min_samples = 100;
  double max_relative_std_error = 0.1;
};

struct FdtLagSummary {
  double lag = 0.0;
  Index entries = 0;
  Index within_limit = 0;
  double max_z = 0.0;
  double max_relative_deviation = 0.0;
};

struct FdtReport {
  Index samples = 0;
  double kbt = 0.0;
  std::vector<FdtLagSummary> lags;
  Index entries = 0;
  Index within_limit = 0;
  double max_z = 0.0;
  double max_relative_deviation = 0.0;  // |dev| / max|kBT theta(0)|
  double max_relative_std_error = 0.0;
  // stationarity: covariances at equal lag compared against each other
  Index stationarity_entries = 0;
  Index stationarity_within_limit = 0;
  double stationarity_max_z = 0.0;
  double mean_max_z = 0.0;  // ensemble mean against zero, worst grid point
  bool insufficient_statistics = false;
  bool fdt_pass = false;
  bool stationarity_pass = false;
  Index dropped_modes = 0;

  bool pass() const { return fdt_pass && stationarity_pass && !insufficient_statistics; }
};

/// Compares the empirical covariance against kbt * theta_hat(t_i - t_j).
/// Entries whose standard error vanishes count as within the limit only
/// when the deviation is zero too.
FdtReport fdt_check(const NoiseEnsemble& ensemble, const KrylovKernelEvaluator& evaluator, double kbt,
                    std::span<const TimePair> pairs, const FdtCriteria& criteria = {});

nlohmann::json to_json(const FdtReport& report);

/// CSV "sample,t,R_1,...,R_M" plus JSON metadata next to it.
void write_ensemble(const NoiseEnsemble& ensemble, const std::filesystem::path& csv_path,
                    const std::filesystem::path& json_path);

}  // namespace mzkernel
