#pragma once

#include "mzkernel/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mzkernel {

enum class Boundary { free, fixed };

/// Coordinates per atom: 1 for chain models, 3 for molecular models.
enum class Dimensionality : int { one_d = 1, three_d = 3 };

enum class HessianFormat { matrix_market, dense_csv };

struct Geometry {
  std::vector<Eigen::Vector3d> positions;  // empty when the source supplied none
  std::vector<double> masses;

  std::size_t count() const { return masses.size(); }
  bool has_positions() const { return !positions.empty(); }

  /// Throws invalid-model / invalid-mass when the invariants do not hold.
  void validate() const;

  static Geometry unit_masses(std::size_t n);
};

/// Symmetric stiffness matrix H together with its mass-weighted form
/// A = M^{-1/2} H M^{-1/2}. Both are stored sparse; `dense_A()` materializes.
class HessianModel {
 public:
  HessianModel(SparseMatrix hessian, Geometry geometry, Dimensionality dims, std::string label,
               std::string units = "reduced", double input_asymmetry = 0.0);

  const SparseMatrix& hessian() const { return hessian_; }
  const SparseMatrix& mass_weighted() const { return weighted_; }
  Matrix dense_A() const { return Matrix(weighted_); }
  Matrix dense_H() const { return Matrix(hessian_); }
  LinearOperator operator_A() const { return sparse_operator(weighted_); }

  Index dim() const { return hessian_.rows(); }
  Dimensionality dimensionality() const { return dims_; }
  int dof_per_atom() const { return static_cast<int>(dims_); }
  const Geometry& geometry() const { return geometry_; }
  const std::string& label() const { return label_; }
  const std::string& units() const { return units_; }
  /// Largest |H - H^T| seen in the input before symmetrization.
  double input_asymmetry() const { return input_asymmetry_; }

 private:
  SparseMatrix hessian_;
  SparseMatrix weighted_;
  Geometry geometry_;
  Dimensionality dims_;
  std::string label_;
  std::string units_;
  double input_asymmetry_;
};

/// A_ij = H_ij / sqrt(m_a(i) m_a(j)), a(i) the atom owning coordinate i.
Matrix mass_weight(const Matrix& hessian, std::span<const double> masses,
                   Dimensionality dims = Dimensionality::three_d);
SparseMatrix mass_weight(const SparseMatrix& hessian, std::span<const double> masses,
                         Dimensionality dims = Dimensionality::three_d);

HessianModel build_harmonic_chain(Index n_atoms, double spring_constant, std::span<const double> masses,
                                  Boundary boundary);

/// Elastic network: every pair closer than `cutoff` is joined by a spring
/// k (e ⊗ e), e the unit bond vector.
HessianModel build_spring_network(const Geometry& geometry, double cutoff, double spring_constant);

/// Jittered simple-cubic lattice with `n_atoms` sites; deterministic in `seed`.
Geometry lattice_geometry(std::size_t n_atoms, std::uint64_t seed, double spacing = 1.0,
                          double jitter = 0.15, double mass_min = 1.0, double mass_max = 1.0);

/// Loads H from disk, symmetrizes it as (H + H^T)/2 and attaches masses (and
/// positions, units) from an optional JSON sidecar. Without a sidecar the
/// model is 1-D with unit masses.
HessianModel load_hessian(const std::filesystem::path& path, HessianFormat format,
                          const std::optional<std::filesystem::path>& sidecar = std::nullopt);

/// Writes H in `format`, plus the sidecar when a path is given.
void save_hessian(const HessianModel& model, const std::filesystem::path& path, HessianFormat format,
                  const std::optional<std::filesystem::path>& sidecar = std::nullopt);

HessianFormat parse_hessian_format(std::string_view name);

}  // namespace mzkernel
