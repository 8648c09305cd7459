#include <catch_amalgamated.hpp>

#include "mzkernel/basis.hpp"
#include "mzkernel/error.hpp"
#include "mzkernel/io.hpp"
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

static double orthonormality_defect(const Matrix& phi) {
  return (phi.transpose() * phi - Matrix::Identity(phi.cols(), phi.cols())).cwiseAbs().maxCoeff();
}

static ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::config;
}

TEST_CASE("single-atom block gives the coordinate axes", "[basis][rtb]") {
  Geometry g;
  g.positions = {Eigen::Vector3d(0.3, -1, 2), Eigen::Vector3d(1.3, -1, 2), Eigen::Vector3d(1.3, 0, 2)};
  g.masses = {1.0, 1.0, 1.0};
  BlockPartition p{{{0}, {1, 2}}};
  const auto basis = build_rtb_basis(g, p, RtbMode::three_d);
  REQUIRE(basis.size() == 3 + 5);
  REQUIRE(basis.provenance() == BasisProvenance::rtb);
  // block of atom 0: the three unit vectors of its coordinates
  Matrix block0 = basis.phi().topRows(3).leftCols(3).cwiseAbs();
  REQUIRE(block0.isApprox(Matrix::Identity(3, 3)));
  REQUIRE(basis.phi().bottomRows(3).leftCols(3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two atoms on the x-axis give five columns", "[basis][rtb]") {
  Geometry g;
  g.positions = {Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(1, 0, 0)};
  g.masses = {1.0, 2.0};
  const auto basis = build_rtb_basis(g, BlockPartition{{{0, 1}}}, RtbMode::three_d);
  REQUIRE(basis.size() == 5);
  REQUIRE(basis.dropped_candidates() == 1);
  REQUIRE(orthonormality_defect(basis.phi()) <= 1e-12);

  // brute-force rank of the six raw candidates
  Matrix raw = Matrix::Zero(6, 6);
  const Eigen::Vector3d center = (1.0 * g.positions[0] + 2.0 * g.positions[1]) / 3.0;
  for (int a = 0; a < 2; ++a) {
    const double s = std::sqrt(g.masses[a]);
    for (int k = 0; k < 3; ++k) {
      raw(3 * a + k, k) = s;
      Eigen::Vector3d e = Eigen::Vector3d::Unit(k);
      raw.block(3 * a, 3 + k, 3, 1) = s * e.cross(g.positions[a] - center);
    }
  }
  Eigen::JacobiSVD<Matrix> svd(raw);
  const auto sv = svd.singularValues();
  Index rank = 0;
  for (Index i = 0; i < sv.size(); ++i) rank += sv(i) > 1e-10 * sv(0);
  REQUIRE(rank == 5);
}

TEST_CASE("whole-network block spans the rigid modes", "[basis][rtb]") {
  const auto g = lattice_geometry(12, 9, 1.0, 0.2, 1.0, 2.0);
  const auto model = build_spring_network(g, 2.0, 1.0);
  BlockPartition all;
  all.blocks.emplace_back();
  for (Index i = 0; i < 12; ++i) all.blocks.front().push_back(i);
  const auto basis = build_rtb_basis(model, all, RtbMode::three_d);
  REQUIRE(basis.size() == 6);
  const Matrix a_phi = model.dense_A() * basis.phi();
  REQUIRE(a_phi.cwiseAbs().maxCoeff() <= 1e-12 * model.dense_A().cwiseAbs().maxCoeff());
}

TEST_CASE("1-D RTB uses one translation per block", "[basis][rtb]") {
  const std::vector<double> masses{1, 4, 1, 1, 9, 1, 1};
  const auto chain = build_harmonic_chain(7, 1.0, masses, Boundary::free);
  const auto p = BlockPartition::uniform(7, 3);
  REQUIRE(p.blocks.size() == 3);
  REQUIRE(p.blocks.back() == std::vector<Index>{6});
  const auto basis = build_rtb_basis(chain, p, RtbMode::one_d);
  REQUIRE(basis.size() == 3);
  REQUIRE(basis.block_local());
  REQUIRE(orthonormality_defect(basis.phi()) <= 1e-14);
  // column of block 0 is proportional to sqrt(m)
  REQUIRE(basis.phi()(1, 0) / basis.phi()(0, 0) == Catch::Approx(2.0));
  REQUIRE(code_of([&] { build_rtb_basis(chain, p, RtbMode::three_d); }) == ErrorCode::partition);
}

TEST_CASE("partition validation", "[basis][errors]") {
  REQUIRE(code_of([] { BlockPartition{{{0, 1}, {1, 2}}}.validate(3); }) == ErrorCode::partition);
  REQUIRE(code_of([] { BlockPartition{{{0, 1}}}.validate(3); }) == ErrorCode::partition);
  REQUIRE(code_of([] { BlockPartition{{{0, 1}, {}, {2}}}.validate(3); }) == ErrorCode::partition);
  REQUIRE(code_of([] { BlockPartition{{{0, 1}, {5}}}.validate(3); }) == ErrorCode::partition);
  REQUIRE_NOTHROW(BlockPartition{{{2, 0}, {1}}}.validate(3));
}

TEST_CASE("partition files round trip", "[basis][io]") {
  const auto dir = scratch("partition");
  BlockPartition p{{{0, 2}, {1}, {3, 4, 5}}};
  save_partition(p, dir / "p.json");
  REQUIRE(load_partition(dir / "p.json").blocks == p.blocks);
}

TEST_CASE("basis from explicit columns", "[basis]") {
  Matrix id = Matrix::Zero(4, 2);
  id(0, 0) = 1;
  id(1, 1) = 1;
  const auto b = basis_from_matrix(id);
  REQUIRE(b.phi() == id);
  REQUIRE(b.dropped_candidates() == 0);

  Matrix dep = Matrix::Zero(4, 2);
  dep(0, 0) = 1;
  dep(0, 1) = 2;
  const auto reduced = basis_from_matrix(dep);
  REQUIRE(reduced.size() == 1);
  REQUIRE(reduced.dropped_candidates() == 1);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Matrix r(30, 5);
  for (Index i = 0; i < r.size(); ++i) r.data()[i] = g(rng);
  REQUIRE(orthonormality_defect(basis_from_matrix(r).phi()) <= 1e-10);

  REQUIRE(code_of([] { basis_from_matrix(Matrix::Zero(3, 1)); }) == ErrorCode::empty_basis);
  REQUIRE(code_of([] { basis_from_matrix(Matrix::Identity(3, 3)); }) == ErrorCode::size);
}

TEST_CASE("basis files", "[basis][io]") {
  const auto dir = scratch("basisfile");
  Matrix m = Matrix::Zero(3, 1);
  m(0, 0) = 3.0;
  m(1, 0) = 4.0;
  io::write_dense_csv(dir / "phi.csv", m);
  const auto b = load_basis(dir / "phi.csv", 3);
  REQUIRE(b.phi()(0, 0) == Catch::Approx(0.6));
  REQUIRE(b.phi()(1, 0) == Catch::Approx(0.8));
  REQUIRE(b.provenance() == BasisProvenance::file);
  REQUIRE(code_of([&] { load_basis(dir / "phi.csv", 4); }) == ErrorCode::shape);
}

TEST_CASE("lowest modes of the three-atom chain", "[basis][modes]") {
  const auto chain = build_harmonic_chain(3, 1.0, std::vector<double>(3, 1.0), Boundary::free);
  const auto null_mode = lowest_modes_basis(chain, 1, false);
  REQUIRE(null_mode.provenance() == BasisProvenance::eigenmodes);
  const Vector expected = Vector::Constant(3, 1.0 / std::sqrt(3.0));
  REQUIRE(std::abs(std::abs(null_mode.phi().col(0).dot(expected)) - 1.0) <= 1e-12);

  const auto first = lowest_modes_basis(chain, 1, true);
  const Vector v = first.phi().col(0);
  REQUIRE((chain.dense_A() * v - v).norm() <= 1e-12);

  const auto almost = lowest_modes_basis(chain, 2, false);
  REQUIRE(almost.dim() - almost.size() == 1);
}

TEST_CASE("complement projector", "[basis][projector]") {
  Matrix e1 = Matrix::Zero(2, 1);
  e1(0, 0) = 1;
  const CGBasis b(e1, BasisProvenance::file);
  Matrix x(2, 1);
  x << 3, 5;
  const Matrix qx = b.apply_qv(x);
  REQUIRE(qx(0, 0) == 0.0);
  REQUIRE(qx(1, 0) == 5.0);

  const auto chain = build_harmonic_chain(12, 1.0, std::vector<double>(12, 1.0), Boundary::free);
  const auto rtb = build_rtb_basis(chain, BlockPartition::uniform(12, 5), RtbMode::one_d);
  const Matrix dense = basis_from_matrix(rtb.phi()).phi();
  const CGBasis global(dense, BasisProvenance::file);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  Matrix y(12, 3);
  for (Index i = 0; i < y.size(); ++i) y.data()[i] = g(rng);
  for (const CGBasis* basis : {&rtb, &global}) {
    const Matrix q1 = basis->apply_qv(y);
    REQUIRE((basis->apply_qv(q1) - q1).cwiseAbs().maxCoeff() <= 1e-12);
    const Matrix in_span = basis->phi() * Matrix::Ones(basis->size(), 1);
    REQUIRE(basis->apply_qv(in_span).norm() <= 1e-12 * in_span.norm());
    REQUIRE((basis->apply_pv(y) + q1 - y).cwiseAbs().maxCoeff() <= 1e-12);
  }
  // block-local and dense application agree
  REQUIRE((rtb.apply_qv(y) - global.apply_qv(y)).cwiseAbs().maxCoeff() <= 1e-12);
  REQUIRE(code_of([&] { rtb.apply_qv(Matrix::Zero(5, 1)); }) == ErrorCode::shape);
}

TEST_CASE("non-orthonormal columns are rejected", "[basis][errors]") {
  Matrix m = Matrix::Zero(3, 1);
  m(0, 0) = 2;
  REQUIRE(code_of([&] { CGBasis(m, BasisProvenance::file); }) == ErrorCode::consistency);
}
