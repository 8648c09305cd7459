#include <catch_amalgamated.hpp>

#include "mzkernel/error.hpp"
#include "mzkernel/io.hpp"
#include "mzkernel/noise.hpp"
#include "mzkernel/parallel.hpp"
#include "oracles.hpp"

#include <cmath>
#include <filesystem>

using namespace mzkernel;

namespace {

HessianModel demo() { return build_harmonic_chain(2, 1.0, std::vector<double>(2, 1.0), Boundary::fixed); }

KrylovKernelEvaluator demo_evaluator() {
  Matrix m = Matrix::Zero(2, 1);
  m(0, 0) = 1;
  const CGBasis basis(m, BasisProvenance::file);
  LanczosOptions o;
  o.order = 1;
  return KrylovKernelEvaluator(block_lanczos(demo().operator_A(), basis, o));
}

KrylovKernelEvaluator network_evaluator() {
  const auto model = build_spring_network(lattice_geometry(12, 2, 1.0, 0.15, 1.0, 2.0), 2.0, 1.0);
  const auto basis = build_rtb_basis(model, BlockPartition::uniform(12, 4), RtbMode::three_d);
  LanczosOptions o;
  o.order = 2;
  return KrylovKernelEvaluator(block_lanczos(model.operator_A(), basis, o));
}

struct ThreadCap {
  explicit ThreadCap(unsigned n) : saved(max_threads()) { set_max_threads(n); }
  ~ThreadCap() { set_max_threads(saved); }
  unsigned saved;
};

}  // namespace

TEST_CASE("stream seeds are distinct and pure", "[noise]") {
  REQUIRE(stream_seed(42, 0) == stream_seed(42, 0));
  REQUIRE(stream_seed(42, 0) != stream_seed(42, 1));
  REQUIRE(stream_seed(42, 0) != stream_seed(43, 0));
}

TEST_CASE("trajectories depend only on seed and sample index", "[noise][determinism]") {
  const auto ev = network_evaluator();
  const NoiseSampler sampler(ev, 1.0, 9);
  const auto times = uniform_grid(0.1, 21);
  const auto a = sample_trajectories(sampler, times, 40);
  REQUIRE(a.count() == 40);
  REQUIRE(a.size() == ev.size());
  for (unsigned threads : {1u, 3u}) {
    ThreadCap cap(threads);
    const auto b = sample_trajectories(sampler, times, 40);
    for (std::size_t s = 0; s < 40; ++s) REQUIRE(a.samples[s] == b.samples[s]);
  }
  REQUIRE(sampler.trajectory(times, 17) == a.samples[17]);
}

TEST_CASE("kBT scales samples by its square root", "[noise]") {
  const auto ev = network_evaluator();
  const auto times = uniform_grid(0.1, 11);
  const auto one = NoiseSampler(ev, 1.0, 5).trajectory(times, 3);
  const auto two = NoiseSampler(ev, 2.0, 5).trajectory(times, 3);
  REQUIRE((two - std::sqrt(2.0) * one).cwiseAbs().maxCoeff() <= 1e-14 * one.cwiseAbs().maxCoeff());
}

TEST_CASE("kBT must be positive", "[noise][errors]") {
  const auto ev = demo_evaluator();
  try {
    NoiseSampler(ev, 0.0, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::config);
  }
}

TEST_CASE("equal-time variance of the demo noise", "[noise][montecarlo]") {
  const auto ev = demo_evaluator();
  const NoiseSampler sampler(ev, 1.0, 2024);
  const std::vector<double> times{0.0};
  const auto ens = sample_trajectories(sampler, times, 100000);
  const std::vector<TimePair> pairs{{0.0, 0.0}};
  const auto cov = empirical_covariance(ens, pairs).front();
  REQUIRE(std::abs(cov.mean(0, 0) - 0.5) <= 3.0 * cov.std_error(0, 0));
}

TEST_CASE("demo noise is stationary", "[noise][montecarlo]") {
  const auto ev = demo_evaluator();
  const NoiseSampler sampler(ev, 1.0, 77);
  const auto times = uniform_grid(0.1, 11);
  const auto ens = sample_trajectories(sampler, times, 100000);
  const std::vector<TimePair> pairs{{0.05, 0.0}, {0.1, 0.05}};
  const auto cov = empirical_covariance(ens, pairs);
  const double se = std::hypot(cov[0].std_error(0, 0), cov[1].std_error(0, 0));
  REQUIRE(std::abs(cov[0].mean(0, 0) - cov[1].mean(0, 0)) <= 3.0 * se);
}

TEST_CASE("zero-coupling noise vanishes", "[noise]") {
  const auto chain = build_harmonic_chain(3, 1.0, std::vector<double>(3, 1.0), Boundary::free);
  const CGBasis null_basis(Matrix::Constant(3, 1, 1.0 / std::sqrt(3.0)), BasisProvenance::file);
  const KrylovKernelEvaluator ev(block_lanczos(chain.operator_A(), null_basis, LanczosOptions{}));
  const NoiseSampler sampler(ev, 1.0, 3);
  const auto times = uniform_grid(0.1, 5);
  const auto ens = sample_trajectories(sampler, times, 10);
  const std::vector<TimePair> pairs{{0.0, 0.0}, {0.1, 0.025}};
  for (const auto& c : empirical_covariance(ens, pairs)) REQUIRE(c.mean.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("equal-time covariance is symmetric", "[noise]") {
  const auto ev = network_evaluator();
  const auto times = uniform_grid(0.1, 3);
  const auto ens = sample_trajectories(NoiseSampler(ev, 1.0, 4), times, 50);
  const std::vector<TimePair> pairs{{0.05, 0.05}};
  const auto c = empirical_covariance(ens, pairs).front();
  REQUIRE(asymmetry(c.mean) <= 1e-15 * c.mean.cwiseAbs().maxCoeff());
}

TEST_CASE("covariance requests off the grid are rejected", "[noise][errors]") {
  const auto ev = demo_evaluator();
  const auto times = uniform_grid(0.1, 11);
  const auto ens = sample_trajectories(NoiseSampler(ev, 1.0, 4), times, 5);
  const std::vector<TimePair> pairs{{0.013, 0.0}};
  try {
    empirical_covariance(ens, pairs);
    FAIL("expected an error");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::grid);
  }
}

TEST_CASE("lag pairs sit on the grid", "[noise]") {
  const auto times = uniform_grid(0.1, 201);
  const std::vector<double> lags{0.0, 0.05, 0.1};
  const auto pairs = lag_pairs(times, lags);
  REQUIRE_FALSE(pairs.empty());
  for (const auto& [t, s] : pairs) {
    REQUIRE(t >= s);
    REQUIRE(std::find(times.begin(), times.end(), t) != times.end());
    REQUIRE(std::find(times.begin(), times.end(), s) != times.end());
  }
  const std::vector<double> too_long{0.2};
  REQUIRE_THROWS_AS(lag_pairs(times, too_long), Error);
}

TEST_CASE("FDT check on the demo", "[noise][fdt]") {
  const auto ev = demo_evaluator();
  const auto times = uniform_grid(0.1, 201);
  const std::vector<double> lags{0.0, 0.05, 0.1};
  const auto pairs = lag_pairs(times, lags);

  SECTION("passes with enough samples") {
    const auto ens = sample_trajectories(NoiseSampler(ev, 1.0, 42), times, 20000);
    const auto report = fdt_check(ens, ev, 1.0, pairs);
    REQUIRE(report.pass());
    REQUIRE(to_json(report)["verdict"] == "PASS");
  }
  SECTION("ten samples are insufficient") {
    const auto ens = sample_trajectories(NoiseSampler(ev, 1.0, 42), times, 10);
    const auto report = fdt_check(ens, ev, 1.0, pairs);
    REQUIRE(report.insufficient_statistics);
    REQUIRE_FALSE(report.pass());
    REQUIRE(to_json(report)["verdict"] == "INSUFFICIENT_STATISTICS");
  }
  SECTION("one sample still yields a report") {
    const auto ens = sample_trajectories(NoiseSampler(ev, 1.0, 42), times, 1);
    const auto report = fdt_check(ens, ev, 1.0, pairs);
    REQUIRE(report.insufficient_statistics);
  }
  SECTION("mismatched kBT fails") {
    const auto ens = sample_trajectories(NoiseSampler(ev, 2.0, 42), times, 20000);
    const auto report = fdt_check(ens, ev, 1.0, pairs);
    REQUIRE_FALSE(report.fdt_pass);
    REQUIRE(to_json(report)["verdict"] == "FAIL");
  }
}

TEST_CASE("ensemble files", "[noise][io]") {
  const auto dir = std::filesystem::temp_directory_path() / "mzkernel_tests" / "ensemble";
  std::filesystem::remove_all(dir);
  const auto ev = network_evaluator();
  const auto times = uniform_grid(0.1, 4);
  const auto ens = sample_trajectories(NoiseSampler(ev, 1.0, 4), times, 3);
  write_ensemble(ens, dir / "e.csv", dir / "e.json");
  const auto text = io::read_text(dir / "e.csv");
  REQUIRE(text.rfind("sample,t,R_1,", 0) == 0);
  REQUIRE(std::count(text.begin(), text.end(), '\n') == 1 + 3 * 4);
  const auto meta = io::read_json(dir / "e.json");
  REQUIRE(meta["samples"] == 3);
  REQUIRE(meta["seed"] == 4);
}
