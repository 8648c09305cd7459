#include "mzkernel/basis.hpp"

#include "mzkernel/error.hpp"
#include "mzkernel/io.hpp"

#include <algorithm>
#include <cmath>

namespace mzkernel {

namespace {

constexpr double kRankTolerance = 1e-8;
constexpr double kOrthonormalityTolerance = 1e-10;

void check_orthonormal(const Matrix& phi) {
  const Matrix gram = phi.transpose() * phi;
  const double defect = max_abs(Matrix(gram - Matrix::Identity(gram.rows(), gram.cols())));
  if (defect > kOrthonormalityTolerance)
    throw Error(ErrorCode::consistency, "basis columns are not orthonormal (defect " + io::format_double(defect) + ")");
}

void check_size(const Matrix& phi) {
  if (phi.cols() == 0) throw Error(ErrorCode::empty_basis, "basis has no columns");
  if (phi.cols() >= phi.rows())
    throw Error(ErrorCode::size, "basis has " + std::to_string(phi.cols()) + " columns in dimension " +
                                     std::to_string(phi.rows()) + "; the complement would be empty");
}

}  // namespace

std::string_view to_string(BasisProvenance p) {
  switch (p) {
    case BasisProvenance::rtb: return "rtb";
    case BasisProvenance::file: return "file";
    case BasisProvenance::eigenmodes: return "eigenmodes";
  }
  return "unknown";
}

void BlockPartition::validate(std::size_t n_atoms) const {
  std::vector<int> owner(n_atoms, -1);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].empty()) throw Error(ErrorCode::partition, "block " + std::to_string(b) + " is empty");
    for (Index atom : blocks[b]) {
      if (atom < 0 || static_cast<std::size_t>(atom) >= n_atoms)
        throw Error(ErrorCode::partition, "atom index " + std::to_string(atom) + " out of range");
      auto& o = owner[static_cast<std::size_t>(atom)];
      if (o >= 0) throw Error(ErrorCode::partition, "atom " + std::to_string(atom) + " appears in two blocks");
      o = static_cast<int>(b);
    }
  }
  for (std::size_t a = 0; a < n_atoms; ++a)
    if (owner[a] < 0) throw Error(ErrorCode::partition, "atom " + std::to_string(a) + " is not in any block");
}

BlockPartition BlockPartition::uniform(std::size_t n_atoms, std::size_t block_size) {
  if (block_size == 0) throw Error(ErrorCode::partition, "block size must be positive");
  BlockPartition p;
  for (std::size_t start = 0; start < n_atoms; start += block_size) {
    std::vector<Index> block;
    for (std::size_t a = start; a < std::min(n_atoms, start + block_size); ++a) block.push_back(static_cast<Index>(a));
    p.blocks.push_back(std::move(block));
  }
  return p;
}

BlockPartition load_partition(const std::filesystem::path& path) {
  const auto doc = io::read_json(path);
  if (!doc.contains("blocks") || !doc.at("blocks").is_array())
    throw Error(ErrorCode::partition, path.string() + ": expected {\"blocks\": [[...], ...]}");
  BlockPartition p;
  for (const auto& block : doc.at("blocks")) p.blocks.push_back(block.get<std::vector<Index>>());
  return p;
}

void save_partition(const BlockPartition& partition, const std::filesystem::path& path) {
  io::write_json(path, nlohmann::json{{"blocks", partition.blocks}});
}

CGBasis::CGBasis(Matrix phi, BasisProvenance provenance, Index dropped_candidates)
    : phi_(std::move(phi)), provenance_(provenance), dropped_candidates_(dropped_candidates) {
  check_size(phi_);
  check_orthonormal(phi_);
}

CGBasis::CGBasis(Matrix phi, std::vector<std::vector<Index>> block_coordinates, std::vector<Index> column_block,
                 Index dropped_candidates)
    : phi_(std::move(phi)),
      provenance_(BasisProvenance::rtb),
      dropped_candidates_(dropped_candidates),
      column_block_(std::move(column_block)) {
  check_size(phi_);
  check_orthonormal(phi_);
  if (static_cast<Index>(column_block_.size()) != phi_.cols())
    throw Error(ErrorCode::shape, "column_block must have one entry per column");

  blocks_.resize(block_coordinates.size());
  std::vector<int> owner(static_cast<std::size_t>(phi_.rows()), -1);
  for (std::size_t b = 0; b < block_coordinates.size(); ++b) {
    blocks_[b].coordinates = std::move(block_coordinates[b]);
    for (Index r : blocks_[b].coordinates) owner[static_cast<std::size_t>(r)] = static_cast<int>(b);
  }
  std::vector<std::vector<Index>> columns(blocks_.size());
  for (Index c = 0; c < phi_.cols(); ++c) {
    const Index b = column_block_[static_cast<std::size_t>(c)];
    if (b < 0 || static_cast<std::size_t>(b) >= blocks_.size())
      throw Error(ErrorCode::partition, "column assigned to a nonexistent block");
    for (Index r = 0; r < phi_.rows(); ++r)
      if (phi_(r, c) != 0.0 && owner[static_cast<std::size_t>(r)] != b)
        throw Error(ErrorCode::consistency, "block-local column has support outside its block");
    columns[static_cast<std::size_t>(b)].push_back(c);
  }
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    auto& blk = blocks_[b];
    blk.phi.resize(static_cast<Index>(blk.coordinates.size()), static_cast<Index>(columns[b].size()));
    for (Index j = 0; j < blk.phi.cols(); ++j)
      for (Index i = 0; i < blk.phi.rows(); ++i)
        blk.phi(i, j) = phi_(blk.coordinates[static_cast<std::size_t>(i)], columns[b][static_cast<std::size_t>(j)]);
  }
}

Matrix CGBasis::apply_qv(const Matrix& x) const {
  if (x.rows() != dim())
    throw Error(ErrorCode::shape, "vector dimension " + std::to_string(x.rows()) + " does not match basis dimension " +
                                      std::to_string(dim()));
  if (!block_local()) return x - phi_ * (phi_.transpose() * x);

  Matrix out = x;
  for (const auto& blk : blocks_) {
    if (blk.phi.cols() == 0) continue;
    const auto n = static_cast<Index>(blk.coordinates.size());
    Matrix local(n, x.cols());
    for (Index i = 0; i < n; ++i) local.row(i) = x.row(blk.coordinates[static_cast<std::size_t>(i)]);
    const Matrix correction = blk.phi * (blk.phi.transpose() * local);
    for (Index i = 0; i < n; ++i) out.row(blk.coordinates[static_cast<std::size_t>(i)]) -= correction.row(i);
  }
  return out;
}

Matrix CGBasis::apply_pv(const Matrix& x) const {
  if (x.rows() != dim()) throw Error(ErrorCode::shape, "vector dimension does not match basis dimension");
  return phi_ * (phi_.transpose() * x);
}

CGBasis build_rtb_basis(const HessianModel& model, const BlockPartition& partition, RtbMode mode) {
  const int expected = mode == RtbMode::one_d ? 1 : 3;
  if (model.dof_per_atom() != expected)
    throw Error(ErrorCode::partition, std::string("RTB mode ") + (expected == 1 ? "1d" : "3d") +
                                          " does not match a model with " + std::to_string(model.dof_per_atom()) +
                                          " coordinates per atom");
  return build_rtb_basis(model.geometry(), partition, mode);
}

CGBasis build_rtb_basis(const Geometry& geometry, const BlockPartition& partition, RtbMode mode) {
  geometry.validate();
  partition.validate(geometry.count());
  const bool three_d = mode == RtbMode::three_d;
  if (three_d && !geometry.has_positions()) throw Error(ErrorCode::partition, "3-D RTB basis needs atom positions");

  const int per_atom = three_d ? 3 : 1;
  const auto dim = static_cast<Index>(geometry.count()) * per_atom;

  std::vector<Matrix> local_columns;
  std::vector<std::vector<Index>> block_coordinates;
  Index dropped = 0;
  for (const auto& block : partition.blocks) {
    const auto n_local = static_cast<Index>(block.size()) * per_atom;
    std::vector<Index> coords;
    for (Index atom : block)
      for (int k = 0; k < per_atom; ++k) coords.push_back(atom * per_atom + k);

    Matrix candidates = Matrix::Zero(n_local, three_d ? 6 : 1);
    if (!three_d) {
      for (std::size_t a = 0; a < block.size(); ++a)
        candidates(static_cast<Index>(a), 0) = std::sqrt(geometry.masses[static_cast<std::size_t>(block[a])]);
    } else {
      double total_mass = 0.0;
      Eigen::Vector3d center = Eigen::Vector3d::Zero();
      for (Index atom : block) {
        const double m = geometry.masses[static_cast<std::size_t>(atom)];
        total_mass += m;
        center += m * geometry.positions[static_cast<std::size_t>(atom)];
      }
      center /= total_mass;
      for (std::size_t a = 0; a < block.size(); ++a) {
        const auto atom = static_cast<std::size_t>(block[a]);
        const double w = std::sqrt(geometry.masses[atom]);
        const Eigen::Vector3d arm = geometry.positions[atom] - center;
        const auto row = static_cast<Index>(3 * a);
        for (int k = 0; k < 3; ++k) {
          candidates(row + k, k) = w;
          const Eigen::Vector3d rot = Eigen::Vector3d::Unit(k).cross(arm) * w;
          candidates.block(row, 3 + k, 3, 1) = rot;
        }
      }
    }
    auto ortho = orthonormalize_columns(candidates, kRankTolerance);
    dropped += ortho.dropped;
    local_columns.push_back(std::move(ortho.columns));
    block_coordinates.push_back(std::move(coords));
  }

  Index total = 0;
  for (const auto& c : local_columns) total += c.cols();
  Matrix phi = Matrix::Zero(dim, total);
  std::vector<Index> column_block;
  Index col = 0;
  for (std::size_t b = 0; b < local_columns.size(); ++b) {
    const auto& local = local_columns[b];
    for (Index j = 0; j < local.cols(); ++j, ++col) {
      for (Index i = 0; i < local.rows(); ++i) phi(block_coordinates[b][static_cast<std::size_t>(i)], col) = local(i, j);
      column_block.push_back(static_cast<Index>(b));
    }
  }
  return CGBasis(std::move(phi), std::move(block_coordinates), std::move(column_block), dropped);
}

CGBasis basis_from_matrix(const Matrix& columns, BasisProvenance provenance) {
  auto ortho = orthonormalize_columns(columns, kRankTolerance);
  if (ortho.columns.cols() == 0) throw Error(ErrorCode::empty_basis, "no independent columns in basis input");
  return CGBasis(std::move(ortho.columns), provenance, ortho.dropped);
}

CGBasis load_basis(const std::filesystem::path& path, std::optional<Index> expected_dim) {
  const Matrix raw = io::read_dense_csv(path);
  if (expected_dim && raw.rows() != *expected_dim)
    throw Error(ErrorCode::shape, path.string() + ": basis has " + std::to_string(raw.rows()) + " rows, expected " +
                                      std::to_string(*expected_dim));
  return basis_from_matrix(raw, BasisProvenance::file);
}

CGBasis lowest_modes_basis(const HessianModel& model, Index m, bool skip_null, double null_threshold) {
  if (m < 1 || m >= model.dim())
    throw Error(ErrorCode::size, "requested " + std::to_string(m) + " modes in dimension " + std::to_string(model.dim()));
  const auto eig = symmetric_eigen(model.dense_A());
  const double cutoff = null_threshold * std::max(eig.values.maxCoeff(), 0.0);
  Index first = 0;
  if (skip_null)
    while (first < eig.values.size() && eig.values(first) <= cutoff) ++first;
  if (first + m > eig.values.size())
    throw Error(ErrorCode::size, "only " + std::to_string(eig.values.size() - first) + " non-null modes available, " +
                                     std::to_string(m) + " requested");
  return CGBasis(eig.vectors.middleCols(first, m), BasisProvenance::eigenmodes);
}

}  // namespace mzkernel
