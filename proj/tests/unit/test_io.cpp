#include <catch_amalgamated.hpp>

#include "mzkernel/error.hpp"
#include "mzkernel/io.hpp"
#include "mzkernel/kernel_series.hpp"
#include "mzkernel/parallel.hpp"
#include "oracles.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <limits>

using namespace mzkernel;
namespace fs = std::filesystem;

static fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "mzkernel_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST_CASE("doubles round trip exactly", "[io]") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    REQUIRE(io::parse_double(io::format_double(x)) == x);
  }
  REQUIRE(io::format_double(0.5) == "0.5");
  REQUIRE(io::parse_double(io::format_double(std::numeric_limits<double>::denorm_min())) ==
          std::numeric_limits<double>::denorm_min());
  REQUIRE_THROWS_AS(io::parse_double("1.5x"), Error);
  REQUIRE_THROWS_AS(io::parse_double(""), Error);
}

TEST_CASE("dense CSV round trip", "[io]") {
  const auto dir = scratch("densecsv");
  const Matrix m = oracle::random_spd(5, 8) / 3.0;
  io::write_dense_csv(dir / "m.csv", m);
  REQUIRE(io::read_dense_csv(dir / "m.csv") == m);
  io::write_text(dir / "ragged.csv", "1,2\n3\n");
  try {
    io::read_dense_csv(dir / "ragged.csv");
    FAIL("expected an error");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::shape);
  }
  REQUIRE_THROWS_AS(io::read_text(dir / "missing.csv"), Error);
}

TEST_CASE("fingerprints follow content", "[io]") {
  Matrix a = Matrix::Identity(3, 3);
  Matrix b = a;
  REQUIRE(io::fingerprint({&a}) == io::fingerprint({&b}));
  b(1, 2) = 1e-300;
  REQUIRE(io::fingerprint({&a}) != io::fingerprint({&b}));
  REQUIRE(io::fingerprint({&a}).size() == 16);
}

TEST_CASE("kernel CSV round trip", "[io][series]") {
  const auto dir = scratch("kernelcsv");
  KernelSeries s;
  s.kind = KernelKind::beta;
  s.source = "exact";
  s.times = uniform_grid(0.1, 7);
  for (std::size_t k = 0; k < s.times.size(); ++k) s.values.push_back(oracle::random_spd(3, k) / 7.0);
  write_kernel_csv(s, dir / "b.csv");
  const auto text = io::read_text(dir / "b.csv");
  REQUIRE(text.rfind("t,beta_1_1,beta_1_2,beta_1_3,beta_2_2,beta_2_3,beta_3_3\n", 0) == 0);
  const auto back = read_kernel_csv(dir / "b.csv");
  REQUIRE(back.kind == KernelKind::beta);
  REQUIRE(back.times == s.times);
  for (std::size_t k = 0; k < s.times.size(); ++k) REQUIRE(back.values[k] == s.values[k]);
}

TEST_CASE("time grids", "[series]") {
  const auto t = uniform_grid(0.1, 201);
  REQUIRE(t.size() == 201);
  REQUIRE(t.front() == 0.0);
  REQUIRE(t.back() == 0.1);
  REQUIRE_THROWS_AS(uniform_grid(0.0, 10), Error);
  REQUIRE_THROWS_AS(uniform_grid(1.0, 1), Error);
  const std::vector<double> bad{0.0, 0.2, 0.1};
  REQUIRE_THROWS_AS(check_grid(bad), Error);
}

TEST_CASE("relative errors", "[series]") {
  KernelSeries ref, approx;
  ref.times = approx.times = {0.0, 1.0};
  ref.values = {Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 0.0)};
  approx.values = {Matrix::Constant(1, 1, 2.2), Matrix::Constant(1, 1, 1e-13)};
  const auto e = relative_errors(approx, ref);
  REQUIRE(e[0] == Catch::Approx(0.1));
  // floored denominator: 1e-13 / (1e-12 * 2)
  REQUIRE(e[1] == Catch::Approx(0.05));
  REQUIRE(max_error_until(ref.times, e, 0.5) == Catch::Approx(0.1));
}

TEST_CASE("parallel_for covers every index once", "[parallel]") {
  const unsigned saved = max_threads();
  for (unsigned n : {1u, 2u, 5u}) {
    set_max_threads(n);
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) REQUIRE(h.load() == 1);
  }
  set_max_threads(4);
  REQUIRE_THROWS_AS(parallel_for(10, [](std::size_t i) {
                      if (i == 7) throw Error(ErrorCode::config, "boom");
                    }),
                    Error);
  set_max_threads(saved);
}
