#pragma once

#include "mzkernel/linalg.hpp"
#include "mzkernel/model.hpp"

#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

namespace mzkernel {

/// Disjoint atom-index blocks covering every atom exactly once.
struct BlockPartition {
  std::vector<std::vector<Index>> blocks;

  /// Throws partition errors for empty blocks, repeated or out-of-range
  /// atoms, or atoms left uncovered.
  void validate(std::size_t n_atoms) const;

  /// Consecutive blocks of `block_size` atoms; the last block takes the remainder.
  static BlockPartition uniform(std::size_t n_atoms, std::size_t block_size);
};

/// JSON {"blocks": [[atom indices]...]}, 0-based.
BlockPartition load_partition(const std::filesystem::path& path);
void save_partition(const BlockPartition& partition, const std::filesystem::path& path);

enum class BasisProvenance { rtb, file, eigenmodes };
std::string_view to_string(BasisProvenance p);

enum class RtbMode { one_d, three_d };

/// Orthonormal coarse-grain basis Phi (dim x M, M < dim).
class CGBasis {
 public:
  /// Columns of `phi` must already be orthonormal.
  CGBasis(Matrix phi, BasisProvenance provenance, Index dropped_candidates = 0);

  /// Block-local basis. `block_coordinates[b]` lists the coordinates owned by
  /// block b and `column_block[c]` the block of column c; every column must
  /// vanish outside its block.
  CGBasis(Matrix phi, std::vector<std::vector<Index>> block_coordinates, std::vector<Index> column_block,
          Index dropped_candidates);

  const Matrix& phi() const { return phi_; }
  Index dim() const { return phi_.rows(); }
  Index size() const { return phi_.cols(); }
  BasisProvenance provenance() const { return provenance_; }
  bool block_local() const { return !column_block_.empty(); }
  const std::vector<Index>& column_block() const { return column_block_; }
  /// Candidates discarded as linearly dependent while building the basis.
  Index dropped_candidates() const { return dropped_candidates_; }

  /// x - Phi (Phi^T x), column by column; done block by block when the basis is block-local.
  Matrix apply_qv(const Matrix& x) const;
  /// Phi Phi^T x.
  Matrix apply_pv(const Matrix& x) const;

 private:
  struct LocalBlock {
    std::vector<Index> coordinates;
    Matrix phi;  // rows restricted to `coordinates`, columns of this block only
  };

  Matrix phi_;
  BasisProvenance provenance_;
  Index dropped_candidates_ = 0;
  std::vector<Index> column_block_;
  std::vector<LocalBlock> blocks_;
};

/// Rigid translations (and, in 3-D mode, rotations about the block mass
/// center) of each block, mass weighted and orthonormalized block-locally.
CGBasis build_rtb_basis(const HessianModel& model, const BlockPartition& partition, RtbMode mode);
CGBasis build_rtb_basis(const Geometry& geometry, const BlockPartition& partition, RtbMode mode);

/// Orthonormalizes the columns of `columns`; dependent columns are dropped.
CGBasis basis_from_matrix(const Matrix& columns, BasisProvenance provenance = BasisProvenance::file);

/// Dense CSV with dim rows and M columns.
CGBasis load_basis(const std::filesystem::path& path, std::optional<Index> expected_dim = std::nullopt);

/// The M eigenvectors of A with smallest eigenvalues. With `skip_null`,
/// eigenvalues at or below null_threshold * max eigenvalue are skipped.
CGBasis lowest_modes_basis(const HessianModel& model, Index m, bool skip_null, double null_threshold = 1e-10);

}  // namespace mzkernel
