#include "mzkernel/noise.hpp"

#include "mzkernel/error.hpp"
#include "mzkernel/io.hpp"
#include "mzkernel/parallel.hpp"
#include "mzkernel/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace mzkernel {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double grid_tolerance(std::span<const double> times) {
  return 1e-9 * std::max(1.0, std::abs(times.back()));
}

std::size_t grid_index(std::span<const double> times, double t) {
  const auto it = std::lower_bound(times.begin(), times.end(), t - grid_tolerance(times));
  if (it == times.end() || std::abs(*it - t) > grid_tolerance(times))
    throw Error(ErrorCode::grid, "time " + io::format_double(t) + " is not on the ensemble grid");
  return static_cast<std::size_t>(it - times.begin());
}

std::size_t nearest_index(std::span<const double> times, double t) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < times.size(); ++i)
    if (std::abs(times[i] - t) < std::abs(times[best] - t)) best = i;
  return best;
}

Matrix theta_at(const KrylovKernelEvaluator& evaluator, double lag) {
  const Vector& mu = evaluator.retained_eigenvalues();
  Vector w(mu.size());
  for (Index i = 0; i < mu.size(); ++i) w(i) = std::cos(std::sqrt(mu(i)) * lag) / mu(i);
  return weighted_outer_sum(evaluator.retained_coupling(), w);
}

double z_score(double deviation, double std_error) {
  if (std_error > 0.0) return std::abs(deviation) / std_error;
  return deviation == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

NoiseSampler::NoiseSampler(const KrylovKernelEvaluator& evaluator, double kbt, std::uint64_t seed)
    : mu_(evaluator.retained_eigenvalues()),
      coupling_(evaluator.retained_coupling()),
      kbt_(kbt),
      seed_(seed),
      fingerprint_(io::fingerprint({&evaluator.factorization().t, &evaluator.factorization().r0})) {
  if (!(kbt > 0.0) || !std::isfinite(kbt)) throw Error(ErrorCode::config, "kBT must be positive");
}

Matrix NoiseSampler::trajectory(std::span<const double> times, std::uint64_t sample) const {
  const Index k = mu_.size();
  std::mt19937_64 rng(stream_seed(seed_, sample));
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector xi(k);
  Vector eta(k);
  for (Index i = 0; i < k; ++i) xi(i) = std::sqrt(kbt_ / mu_(i)) * normal(rng);
  for (Index i = 0; i < k; ++i) eta(i) = std::sqrt(kbt_) * normal(rng);

  const Vector freq = mu_.cwiseSqrt();
  Matrix amplitude(static_cast<Index>(times.size()), k);
  for (std::size_t j = 0; j < times.size(); ++j)
    for (Index i = 0; i < k; ++i) {
      const double phase = freq(i) * times[j];
      amplitude(static_cast<Index>(j), i) = std::cos(phase) * xi(i) + std::sin(phase) * eta(i) / freq(i);
    }
  return amplitude * coupling_.transpose();
}

NoiseEnsemble sample_trajectories(const NoiseSampler& sampler, std::span<const double> times, Index count) {
  if (count < 1) throw Error(ErrorCode::config, "need at least one sample");
  check_grid(times);
  NoiseEnsemble e;
  e.times.assign(times.begin(), times.end());
  e.seed = sampler.seed();
  e.kbt = sampler.kbt();
  e.fingerprint = sampler.fingerprint();
  e.samples.resize(static_cast<std::size_t>(count));
  parallel_for(static_cast<std::size_t>(count),
               [&](std::size_t s) { e.samples[s] = sampler.trajectory(times, static_cast<std::uint64_t>(s)); });
  return e;
}

std::vector<CovarianceEstimate> empirical_covariance(const NoiseEnsemble& ensemble, std::span<const TimePair> pairs) {
  const Index s_count = ensemble.count();
  if (s_count < 2) throw Error(ErrorCode::config, "covariance estimates need at least two samples");
  const Index m = ensemble.size();
  std::vector<CovarianceEstimate> out;
  for (const auto& pair : pairs) {
    const auto i = static_cast<Index>(grid_index(ensemble.times, pair.first));
    const auto j = static_cast<Index>(grid_index(ensemble.times, pair.second));
    Matrix sum = Matrix::Zero(m, m);
    Matrix sum_sq = Matrix::Zero(m, m);
    for (const auto& sample : ensemble.samples) {
      const Matrix prod = sample.row(i).transpose() * sample.row(j);
      sum += prod;
      sum_sq += prod.cwiseProduct(prod);
    }
    const auto n = static_cast<double>(s_count);
    CovarianceEstimate est;
    est.times = {ensemble.times[static_cast<std::size_t>(i)], ensemble.times[static_cast<std::size_t>(j)]};
    est.mean = sum / n;
    const Matrix variance = ((sum_sq - n * est.mean.cwiseProduct(est.mean)) / (n - 1.0)).cwiseMax(0.0);
    est.std_error = (variance / n).cwiseSqrt();
    out.push_back(std::move(est));
  }
  return out;
}

std::vector<TimePair> lag_pairs(std::span<const double> times, std::span<const double> lags) {
  check_grid(times);
  const double t_max = times.back();
  std::vector<TimePair> out;
  for (double lag : lags) {
    if (lag < 0.0 || lag > t_max - times.front() + grid_tolerance(times))
      throw Error(ErrorCode::grid, "lag " + io::format_double(lag) + " does not fit on the grid");
    const double span = t_max - lag;
    for (double s : {times.front(), 0.5 * (times.front() + span), span}) {
      const std::size_t is = nearest_index(times, s);
      const std::size_t it = nearest_index(times, times[is] + lag);
      const TimePair p{times[it], times[is]};
      if (std::abs((p.first - p.second) - lag) > 0.5 * (times.size() > 1 ? times[1] - times[0] : 0.0) + grid_tolerance(times))
        continue;
      if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
    }
  }
  return out;
}

FdtReport fdt_check(const NoiseEnsemble& ensemble, const KrylovKernelEvaluator& evaluator, double kbt,
                    std::span<const TimePair> pairs, const FdtCriteria& criteria) {
  FdtReport r;
  r.samples = ensemble.count();
  r.kbt = kbt;
  r.dropped_modes = static_cast<Index>(evaluator.dropped().size());
  if (r.samples < 2) {
    r.insufficient_statistics = true;
    return r;
  }

  const Matrix theta0 = theta_at(evaluator, 0.0);
  const double scale = kbt * max_abs(theta0);
  const auto estimates = empirical_covariance(ensemble, pairs);
  const double tol = grid_tolerance(ensemble.times);

  for (const auto& est : estimates) {
    const double lag = est.times.first - est.times.second;
    const Matrix expected = kbt * theta_at(evaluator, std::abs(lag));
    auto summary = std::find_if(r.lags.begin(), r.lags.end(),
                                [&](const FdtLagSummary& s) { return std::abs(s.lag - lag) <= tol; });
    if (summary == r.lags.end()) {
      r.lags.push_back(FdtLagSummary{lag});
      summary = r.lags.end() - 1;
    }
    for (Index a = 0; a < expected.rows(); ++a)
      for (Index b = 0; b < expected.cols(); ++b) {
        const double dev = est.mean(a, b) - expected(a, b);
        const double z = z_score(dev, est.std_error(a, b));
        const double rel = scale > 0.0 ? std::abs(dev) / scale : std::abs(dev);
        ++summary->entries;
        if (z <= criteria.z_limit) ++summary->within_limit;
        summary->max_z = std::max(summary->max_z, z);
        summary->max_relative_deviation = std::max(summary->max_relative_deviation, rel);
        r.max_relative_std_error =
            std::max(r.max_relative_std_error, scale > 0.0 ? est.std_error(a, b) / scale : 0.0);
      }
  }
  for (const auto& s : r.lags) {
    r.entries += s.entries;
    r.within_limit += s.within_limit;
    r.max_z = std::max(r.max_z, s.max_z);
    r.max_relative_deviation = std::max(r.max_relative_deviation, s.max_relative_deviation);
  }

  // Equal-lag estimates should agree with each other.
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double lag_i = estimates[i].times.first - estimates[i].times.second;
    for (std::size_t j = i + 1; j < estimates.size(); ++j) {
      const double lag_j = estimates[j].times.first - estimates[j].times.second;
      if (std::abs(lag_i - lag_j) > tol) continue;
      for (Index a = 0; a < estimates[i].mean.rows(); ++a)
        for (Index b = 0; b < estimates[i].mean.cols(); ++b) {
          const double dev = estimates[i].mean(a, b) - estimates[j].mean(a, b);
          const double se = std::hypot(estimates[i].std_error(a, b), estimates[j].std_error(a, b));
          const double z = z_score(dev, se);
          ++r.stationarity_entries;
          if (z <= criteria.z_limit) ++r.stationarity_within_limit;
          r.stationarity_max_z = std::max(r.stationarity_max_z, z);
        }
      break;
    }
  }

  // Zero mean at every grid point.
  const auto n = static_cast<double>(r.samples);
  for (std::size_t t = 0; t < ensemble.times.size(); ++t) {
    for (Index a = 0; a < ensemble.size(); ++a) {
      double sum = 0.0;
      double sum_sq = 0.0;
      for (const auto& sample : ensemble.samples) {
        const double v = sample(static_cast<Index>(t), a);
        sum += v;
        sum_sq += v * v;
      }
      const double mean = sum / n;
      const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
      r.mean_max_z = std::max(r.mean_max_z, z_score(mean, std::sqrt(var / n)));
    }
  }

  r.insufficient_statistics = r.samples < criteria.min_samples || r.max_relative_std_error > criteria.max_relative_std_error;
  r.fdt_pass = r.entries > 0 && static_cast<double>(r.within_limit) >= criteria.pass_fraction * static_cast<double>(r.entries);
  r.stationarity_pass = static_cast<double>(r.stationarity_within_limit) >=
                        criteria.pass_fraction * static_cast<double>(r.stationarity_entries);
  return r;
}

nlohmann::json to_json(const FdtReport& r) {
  auto lags = nlohmann::json::array();
  for (const auto& s : r.lags)
    lags.push_back({{"lag", s.lag},
                    {"entries", s.entries},
                    {"within_limit", s.within_limit},
                    {"max_z", s.max_z},
                    {"max_relative_deviation", s.max_relative_deviation}});
  std::string verdict = r.pass() ? "PASS" : (r.insufficient_statistics ? "INSUFFICIENT_STATISTICS" : "FAIL");
  return {{"verdict", verdict},
          {"samples", r.samples},
          {"kBT", r.kbt},
          {"entries", r.entries},
          {"within_limit", r.within_limit},
          {"max_z", std::isfinite(r.max_z) ? nlohmann::json(r.max_z) : nlohmann::json("inf")},
          {"max_relative_deviation", r.max_relative_deviation},
          {"max_relative_std_error", r.max_relative_std_error},
          {"fdt_pass", r.fdt_pass},
          {"stationarity",
           {{"entries", r.stationarity_entries},
            {"within_limit", r.stationarity_within_limit},
            {"max_z", std::isfinite(r.stationarity_max_z) ? nlohmann::json(r.stationarity_max_z) : nlohmann::json("inf")},
            {"pass", r.stationarity_pass}}},
          {"mean_max_z", std::isfinite(r.mean_max_z) ? nlohmann::json(r.mean_max_z) : nlohmann::json("inf")},
          {"insufficient_statistics", r.insufficient_statistics},
          {"dropped_modes", r.dropped_modes},
          {"lags", lags}};
}

void write_ensemble(const NoiseEnsemble& ensemble, const std::filesystem::path& csv_path,
                    const std::filesystem::path& json_path) {
  std::string out = "sample,t";
  for (Index k = 0; k < ensemble.size(); ++k) out += ",R_" + std::to_string(k + 1);
  out += '\n';
  for (std::size_t s = 0; s < ensemble.samples.size(); ++s) {
    const Matrix& traj = ensemble.samples[s];
    for (std::size_t t = 0; t < ensemble.times.size(); ++t) {
      out += std::to_string(s);
      out += ',';
      out += io::format_double(ensemble.times[t]);
      for (Index k = 0; k < traj.cols(); ++k) {
        out += ',';
        out += io::format_double(traj(static_cast<Index>(t), k));
      }
      out += '\n';
    }
  }
  io::write_text(csv_path, out);
  io::write_json(json_path, {{"seed", ensemble.seed},
                             {"kBT", ensemble.kbt},
                             {"samples", ensemble.count()},
                             {"points", ensemble.times.size()},
                             {"M", ensemble.size()},
                             {"factorization_fingerprint", ensemble.fingerprint}});
}

}  // namespace mzkernel
