#include "mzkernel/model.hpp"

#include "mzkernel/error.hpp"
#include "mzkernel/io.hpp"

#include <cmath>
#include <random>

namespace mzkernel {

namespace fs = std::filesystem;

void Geometry::validate() const {
  if (masses.empty()) throw Error(ErrorCode::invalid_model, "geometry has no atoms");
  if (!positions.empty() && positions.size() != masses.size())
    throw Error(ErrorCode::invalid_model, "positions and masses have different lengths");
  for (double m : masses)
    if (!(m > 0.0) || !std::isfinite(m)) throw Error(ErrorCode::invalid_mass, "masses must be positive and finite");
}

Geometry Geometry::unit_masses(std::size_t n) { return Geometry{{}, std::vector<double>(n, 1.0)}; }

namespace {

void check_mass_layout(Index dim, std::span<const double> masses, Dimensionality dims) {
  for (double m : masses)
    if (!(m > 0.0) || !std::isfinite(m)) throw Error(ErrorCode::invalid_mass, "masses must be positive and finite");
  const auto expected = static_cast<Index>(masses.size()) * static_cast<int>(dims);
  if (dim != expected)
    throw Error(ErrorCode::shape, "matrix dimension " + std::to_string(dim) + " does not match " +
                                      std::to_string(masses.size()) + " atoms x " +
                                      std::to_string(static_cast<int>(dims)) + " coordinates");
}

Vector inverse_sqrt_masses(Index dim, std::span<const double> masses, Dimensionality dims) {
  const int per_atom = static_cast<int>(dims);
  Vector s(dim);
  for (Index i = 0; i < dim; ++i) s(i) = 1.0 / std::sqrt(masses[static_cast<std::size_t>(i / per_atom)]);
  return s;
}

}  // namespace

Matrix mass_weight(const Matrix& hessian, std::span<const double> masses, Dimensionality dims) {
  if (hessian.rows() != hessian.cols()) throw Error(ErrorCode::shape, "Hessian must be square");
  check_mass_layout(hessian.rows(), masses, dims);
  const Vector s = inverse_sqrt_masses(hessian.rows(), masses, dims);
  Matrix a(hessian.rows(), hessian.cols());
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i) a(i, j) = hessian(i, j) * (s(i) * s(j));
  return a;
}

SparseMatrix mass_weight(const SparseMatrix& hessian, std::span<const double> masses, Dimensionality dims) {
  if (hessian.rows() != hessian.cols()) throw Error(ErrorCode::shape, "Hessian must be square");
  check_mass_layout(hessian.rows(), masses, dims);
  const Vector s = inverse_sqrt_masses(hessian.rows(), masses, dims);
  SparseMatrix a = hessian;
  for (Index j = 0; j < a.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(a, j); it; ++it) it.valueRef() = it.value() * (s(it.row()) * s(j));
  return a;
}

HessianModel::HessianModel(SparseMatrix hessian, Geometry geometry, Dimensionality dims, std::string label,
                           std::string units, double input_asymmetry)
    : hessian_(std::move(hessian)),
      geometry_(std::move(geometry)),
      dims_(dims),
      label_(std::move(label)),
      units_(std::move(units)),
      input_asymmetry_(input_asymmetry) {
  geometry_.validate();
  if (hessian_.rows() != hessian_.cols()) throw Error(ErrorCode::shape, "Hessian must be square");
  hessian_.makeCompressed();
  const SparseMatrix transpose = hessian_.transpose();
  const double scale = max_abs(hessian_);
  const double defect = max_abs(SparseMatrix(hessian_ - transpose));
  if (defect > 1e-12 * scale)
    throw Error(ErrorCode::asymmetry, "Hessian is not symmetric (max |H - H^T| = " + io::format_double(defect) + ")");
  weighted_ = mass_weight(hessian_, geometry_.masses, dims_);
  weighted_.makeCompressed();
}

HessianModel build_harmonic_chain(Index n_atoms, double spring_constant, std::span<const double> masses,
                                  Boundary boundary) {
  if (n_atoms < 2) throw Error(ErrorCode::invalid_model, "a chain needs at least two atoms");
  if (!(spring_constant > 0.0)) throw Error(ErrorCode::invalid_model, "spring constant must be positive");
  if (static_cast<Index>(masses.size()) != n_atoms)
    throw Error(ErrorCode::shape, "chain needs one mass per atom");

  std::vector<Eigen::Triplet<double, Index>> entries;
  for (Index i = 0; i + 1 < n_atoms; ++i) {
    entries.emplace_back(i, i, spring_constant);
    entries.emplace_back(i + 1, i + 1, spring_constant);
    entries.emplace_back(i, i + 1, -spring_constant);
    entries.emplace_back(i + 1, i, -spring_constant);
  }
  if (boundary == Boundary::fixed) {
    entries.emplace_back(0, 0, spring_constant);
    entries.emplace_back(n_atoms - 1, n_atoms - 1, spring_constant);
  }
  SparseMatrix h(n_atoms, n_atoms);
  h.setFromTriplets(entries.begin(), entries.end());

  Geometry geometry;
  geometry.masses.assign(masses.begin(), masses.end());
  for (Index i = 0; i < n_atoms; ++i) geometry.positions.emplace_back(static_cast<double>(i), 0.0, 0.0);
  const std::string label = std::string(boundary == Boundary::free ? "free" : "fixed") + " chain, " +
                            std::to_string(n_atoms) + " atoms";
  return HessianModel(std::move(h), std::move(geometry), Dimensionality::one_d, label);
}

HessianModel build_spring_network(const Geometry& geometry, double cutoff, double spring_constant) {
  geometry.validate();
  if (geometry.count() < 2) throw Error(ErrorCode::invalid_model, "a network needs at least two atoms");
  if (!geometry.has_positions()) throw Error(ErrorCode::invalid_model, "a network needs atom positions");
  if (!(cutoff > 0.0)) throw Error(ErrorCode::invalid_model, "cutoff must be positive");
  if (!(spring_constant > 0.0)) throw Error(ErrorCode::invalid_model, "spring constant must be positive");

  const auto n = static_cast<Index>(geometry.count());
  std::vector<Eigen::Triplet<double, Index>> entries;
  std::size_t bonds = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const Eigen::Vector3d d = geometry.positions[static_cast<std::size_t>(j)] - geometry.positions[static_cast<std::size_t>(i)];
      const double r = d.norm();
      if (r > cutoff) continue;
      if (r == 0.0)
        throw Error(ErrorCode::degenerate_bond,
                    "atoms " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
      const Eigen::Vector3d e = d / r;
      const Eigen::Matrix3d block = spring_constant * (e * e.transpose());
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          const double v = block(a, b);
          if (v == 0.0) continue;
          // upper triangle; mirrored below
          if (a <= b) {
            entries.emplace_back(3 * i + a, 3 * i + b, v);
            entries.emplace_back(3 * j + a, 3 * j + b, v);
          }
          entries.emplace_back(3 * i + a, 3 * j + b, -v);
        }
      }
      ++bonds;
    }
  }
  if (bonds == 0) throw Error(ErrorCode::invalid_model, "no atom pairs within the cutoff");
  SparseMatrix upper(3 * n, 3 * n);
  upper.setFromTriplets(entries.begin(), entries.end());
  SparseMatrix h = upper.selfadjointView<Eigen::Upper>();
  const std::string label = "spring network, " + std::to_string(n) + " atoms, " + std::to_string(bonds) + " bonds";
  return HessianModel(std::move(h), geometry, Dimensionality::three_d, label);
}

Geometry lattice_geometry(std::size_t n_atoms, std::uint64_t seed, double spacing, double jitter, double mass_min,
                          double mass_max) {
  std::size_t side = 1;
  while (side * side * side < n_atoms) ++side;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> offset(-jitter, jitter);
  std::uniform_real_distribution<double> mass(mass_min, mass_max);
  Geometry g;
  for (std::size_t i = 0; i < n_atoms; ++i) {
    const auto x = static_cast<double>(i % side);
    const auto y = static_cast<double>((i / side) % side);
    const auto z = static_cast<double>(i / (side * side));
    Eigen::Vector3d p(x, y, z);
    p *= spacing;
    for (int k = 0; k < 3; ++k) p(k) += spacing * offset(rng);
    g.positions.push_back(p);
    g.masses.push_back(mass_max > mass_min ? mass(rng) : mass_min);
  }
  return g;
}

HessianFormat parse_hessian_format(std::string_view name) {
  if (name == "matrix-market" || name == "mtx") return HessianFormat::matrix_market;
  if (name == "dense-csv" || name == "csv") return HessianFormat::dense_csv;
  throw Error(ErrorCode::config, "unknown Hessian format '" + std::string(name) + "'");
}

HessianModel load_hessian(const fs::path& path, HessianFormat format, const std::optional<fs::path>& sidecar) {
  SparseMatrix raw;
  if (format == HessianFormat::dense_csv) {
    const Matrix dense = io::read_dense_csv(path);
    if (dense.rows() != dense.cols())
      throw Error(ErrorCode::shape, path.string() + ": matrix is " + std::to_string(dense.rows()) + "x" +
                                        std::to_string(dense.cols()) + ", expected square");
    raw = dense.sparseView(0.0, 0.0);
  } else {
    raw = io::read_matrix_market(path);
    if (raw.rows() != raw.cols()) throw Error(ErrorCode::shape, path.string() + ": matrix is not square");
  }
  if (raw.rows() == 0) throw Error(ErrorCode::shape, path.string() + ": empty matrix");

  const SparseMatrix transpose = raw.transpose();
  const double scale = max_abs(raw);
  const double defect = max_abs(SparseMatrix(raw - transpose));
  if (defect > 1e-6 * scale)
    throw Error(ErrorCode::asymmetry, path.string() + ": max |H - H^T| = " + io::format_double(defect) +
                                          " exceeds 1e-6 * max|H| = " + io::format_double(1e-6 * scale));
  SparseMatrix h = 0.5 * (raw + transpose);

  Geometry geometry = Geometry::unit_masses(static_cast<std::size_t>(h.rows()));
  Dimensionality dims = Dimensionality::one_d;
  std::string units = "reduced";
  if (sidecar) {
    const auto doc = io::read_json(*sidecar);
    if (!doc.contains("masses")) throw Error(ErrorCode::io, sidecar->string() + ": sidecar lacks \"masses\"");
    geometry.masses = doc.at("masses").get<std::vector<double>>();
    geometry.positions.clear();
    if (doc.contains("positions")) {
      for (const auto& p : doc.at("positions")) {
        const auto v = p.get<std::vector<double>>();
        if (v.size() != 3) throw Error(ErrorCode::shape, sidecar->string() + ": positions must be 3-vectors");
        geometry.positions.emplace_back(v[0], v[1], v[2]);
      }
    }
    if (doc.contains("units")) units = doc.at("units").get<std::string>();
    const auto n = static_cast<Index>(geometry.masses.size());
    if (h.rows() == 3 * n) {
      dims = Dimensionality::three_d;
    } else if (h.rows() != n) {
      throw Error(ErrorCode::shape, "matrix dimension " + std::to_string(h.rows()) + " fits neither " +
                                        std::to_string(n) + " nor " + std::to_string(3 * n) + " coordinates");
    }
  }
  return HessianModel(std::move(h), std::move(geometry), dims, path.filename().string(), units, defect);
}

void save_hessian(const HessianModel& model, const fs::path& path, HessianFormat format,
                  const std::optional<fs::path>& sidecar) {
  if (format == HessianFormat::dense_csv)
    io::write_dense_csv(path, model.dense_H());
  else
    io::write_matrix_market_symmetric(path, model.hessian());
  if (sidecar) {
    nlohmann::json doc;
    doc["masses"] = model.geometry().masses;
    if (model.geometry().has_positions()) {
      auto positions = nlohmann::json::array();
      for (const auto& p : model.geometry().positions) positions.push_back({p.x(), p.y(), p.z()});
      doc["positions"] = positions;
    }
    doc["units"] = model.units();
    io::write_json(*sidecar, doc);
  }
}

}  // namespace mzkernel
