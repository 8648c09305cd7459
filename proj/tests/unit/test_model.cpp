#include <catch_amalgamated.hpp>

#include "mzkernel/error.hpp"
#include "mzkernel/io.hpp"
#include "mzkernel/model.hpp"
#include "oracles.hpp"

#include <filesystem>

using namespace mzkernel;
namespace fs = std::filesystem;

static fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "mzkernel_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

static std::vector<double> ones(std::size_t n) { return std::vector<double>(n, 1.0); }

TEST_CASE("harmonic chain stiffness", "[model]") {
  const auto m = build_harmonic_chain(3, 1.0, ones(3), Boundary::free);
  Matrix expected(3, 3);
  expected << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  REQUIRE(m.dense_H() == expected);
  REQUIRE(m.dense_A() == expected);
  REQUIRE(m.dim() == 3);
  REQUIRE(m.dof_per_atom() == 1);
  REQUIRE(m.dense_H().rowwise().sum().cwiseAbs().maxCoeff() == 0.0);

  const auto two = build_harmonic_chain(2, 1.0, ones(2), Boundary::free);
  const auto eig = symmetric_eigen(two.dense_H()).values;
  REQUIRE(eig(0) == Catch::Approx(0.0).margin(1e-14));
  REQUIRE(eig(1) == Catch::Approx(2.0));

  const std::vector<double> heavy{4.0, 4.0};
  Matrix a(2, 2);
  a << 0.25, -0.25, -0.25, 0.25;
  REQUIRE(build_harmonic_chain(2, 1.0, heavy, Boundary::free).dense_A() == a);
}

TEST_CASE("fixed chain adds wall springs", "[model]") {
  const auto m = build_harmonic_chain(2, 1.0, ones(2), Boundary::fixed);
  Matrix expected(2, 2);
  expected << 2, -1, -1, 2;
  REQUIRE(m.dense_H() == expected);
}

TEST_CASE("chain input errors", "[model][errors]") {
  REQUIRE_THROWS_AS(build_harmonic_chain(1, 1.0, ones(1), Boundary::free), Error);
  const std::vector<double> bad{1.0, -1.0};
  try {
    build_harmonic_chain(2, 1.0, bad, Boundary::free);
    FAIL("expected an error");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::invalid_mass);
  }
  try {
    build_harmonic_chain(3, 1.0, ones(2), Boundary::free);
    FAIL("expected an error");
  } catch (const Error& e) {
    REQUIRE((e.code() == ErrorCode::invalid_mass || e.code() == ErrorCode::shape));
  }
}

TEST_CASE("two-atom spring network", "[model][network]") {
  Geometry g;
  g.positions = {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 0)};
  g.masses = {1.0, 1.0};
  const auto m = build_spring_network(g, 1.5, 1.0);
  REQUIRE(m.dim() == 6);
  const auto eig = symmetric_eigen(m.dense_A()).values;
  for (int i = 0; i < 5; ++i) REQUIRE(std::abs(eig(i)) <= 1e-14);
  REQUIRE(eig(5) == Catch::Approx(2.0));
  // only x-components couple
  const Matrix a = m.dense_A();
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 6; ++j)
      if (i % 3 != 0 || j % 3 != 0) REQUIRE(a(i, j) == 0.0);

  try {
    build_spring_network(g, 0.5, 1.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::invalid_model);
  }
}

TEST_CASE("coincident atoms are a degenerate bond", "[model][network][errors]") {
  Geometry g;
  g.positions = {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(0, 0, 0)};
  g.masses = {1.0, 1.0};
  try {
    build_spring_network(g, 1.5, 1.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::degenerate_bond);
  }
}

TEST_CASE("network annihilates mass-weighted translations", "[model][network]") {
  const auto g = lattice_geometry(27, 3, 1.0, 0.15, 1.0, 3.0);
  const auto m = build_spring_network(g, 2.0, 1.0);
  const Matrix a = m.dense_A();
  for (int d = 0; d < 3; ++d) {
    Vector t = Vector::Zero(m.dim());
    for (std::size_t i = 0; i < g.count(); ++i) t(static_cast<Index>(3 * i) + d) = std::sqrt(g.masses[i]);
    REQUIRE((a * t).cwiseAbs().maxCoeff() <= 1e-12 * a.cwiseAbs().maxCoeff());
  }
  REQUIRE(asymmetry(a) == 0.0);
}

TEST_CASE("lattice geometry is deterministic in its seed", "[model][network]") {
  const auto a = lattice_geometry(20, 11);
  const auto b = lattice_geometry(20, 11);
  const auto c = lattice_geometry(20, 12);
  REQUIRE(a.count() == 20);
  for (std::size_t i = 0; i < 20; ++i) REQUIRE(a.positions[i] == b.positions[i]);
  bool differs = false;
  for (std::size_t i = 0; i < 20; ++i) differs = differs || a.positions[i] != c.positions[i];
  REQUIRE(differs);
}

TEST_CASE("mass weighting", "[model]") {
  Matrix h1(1, 1);
  h1 << 4;
  const std::vector<double> m1{4.0};
  REQUIRE(mass_weight(h1, m1, Dimensionality::one_d)(0, 0) == 1.0);

  Matrix h(2, 2);
  h << 2, -1, -1, 2;
  const std::vector<double> m2{1.0, 4.0};
  Matrix expected(2, 2);
  expected << 2, -0.5, -0.5, 0.5;
  REQUIRE(mass_weight(h, m2, Dimensionality::one_d) == expected);
  REQUIRE(mass_weight(h, ones(2), Dimensionality::one_d) == h);

  const Matrix h6 = oracle::random_spd(6, 5);
  REQUIRE(mass_weight(h6, ones(2), Dimensionality::three_d) == h6);
  REQUIRE_THROWS_AS(mass_weight(h6, ones(3), Dimensionality::three_d), Error);
}

TEST_CASE("dense CSV hessian", "[model][io]") {
  const auto dir = scratch("csv");
  io::write_text(dir / "h.csv", "2,-1\n-1,2\n");
  const auto m = load_hessian(dir / "h.csv", HessianFormat::dense_csv);
  Matrix expected(2, 2);
  expected << 2, -1, -1, 2;
  REQUIRE(m.dense_A() == expected);
  REQUIRE(m.dense_H() == expected);

  io::write_text(dir / "bad.csv", "1,2,3\n4,5,6\n");
  try {
    load_hessian(dir / "bad.csv", HessianFormat::dense_csv);
    FAIL("expected an error");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::shape);
  }

  io::write_text(dir / "asym.csv", "2,-1\n-3,2\n");
  try {
    load_hessian(dir / "asym.csv", HessianFormat::dense_csv);
    FAIL("expected an error");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::asymmetry);
  }

  // tiny asymmetry is symmetrized and recorded
  io::write_text(dir / "near.csv", "2,-1\n-1.0000000000001,2\n");
  const auto near = load_hessian(dir / "near.csv", HessianFormat::dense_csv);
  REQUIRE(near.input_asymmetry() > 0.0);
  REQUIRE(asymmetry(near.dense_H()) == 0.0);
}

TEST_CASE("matrix market round trip of a chain", "[model][io]") {
  const auto dir = scratch("mtx");
  const std::vector<double> masses{1.0, 2.5, 0.75};
  const auto chain = build_harmonic_chain(3, 1.7, masses, Boundary::free);
  save_hessian(chain, dir / "chain.mtx", HessianFormat::matrix_market, dir / "chain.json");
  const auto back = load_hessian(dir / "chain.mtx", HessianFormat::matrix_market, dir / "chain.json");
  REQUIRE(back.dense_H() == chain.dense_H());
  REQUIRE(back.dense_A() == chain.dense_A());
  REQUIRE(back.geometry().masses == masses);

  const auto plain = load_hessian(dir / "chain.mtx", HessianFormat::matrix_market);
  REQUIRE(plain.dense_H() == chain.dense_H());
}

TEST_CASE("3-D hessian round trip keeps bits", "[model][io]") {
  const auto dir = scratch("mtx3");
  const auto g = lattice_geometry(8, 4, 1.0, 0.2, 1.0, 2.0);
  const auto net = build_spring_network(g, 2.0, 1.3);
  for (auto format : {HessianFormat::matrix_market, HessianFormat::dense_csv}) {
    const auto path = dir / (format == HessianFormat::dense_csv ? "h.csv" : "h.mtx");
    save_hessian(net, path, format, dir / "side.json");
    const auto back = load_hessian(path, format, dir / "side.json");
    REQUIRE(back.dof_per_atom() == 3);
    REQUIRE(back.dense_H() == net.dense_H());
    REQUIRE(back.dense_A() == net.dense_A());
  }
}

TEST_CASE("malformed matrix market", "[model][io][errors]") {
  const auto dir = scratch("mtxbad");
  io::write_text(dir / "short.mtx", "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 2\n2 2 2\n");
  REQUIRE_THROWS_AS(io::read_matrix_market(dir / "short.mtx"), Error);
}
