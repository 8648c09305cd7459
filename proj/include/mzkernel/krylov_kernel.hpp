#pragma once

#include "mzkernel/basis.hpp"
#include "mzkernel/exact_kernel.hpp"
#include "mzkernel/kernel_series.hpp"
#include "mzkernel/model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mzkernel {

enum class Reorthogonalization { full, local };
std::string_view to_string(Reorthogonalization r);
Reorthogonalization parse_reorthogonalization(std::string_view name);

struct LanczosOptions {
  int order = 4;
  double rank_tol = 1e-10;
  Reorthogonalization reorth = Reorthogonalization::full;
};

struct DeflationEvent {
  int step = 0;
  Index dropped = 0;
};

/// Block-tridiagonal reduction of the projected operator Q A Q on the block
/// Krylov space generated by Q (A Phi).
struct BlockLanczosFactorization {
  int requested_order = 0;
  int steps = 0;        // block steps completed
  Matrix t;             // P x P, diagonal blocks A_j, off-diagonal blocks B_j
  Matrix r0;            // p_1 x M, Z_0 = V_1 R0
  Index start_columns = 0;
  std::vector<Index> block_sizes;
  std::vector<DeflationEvent> deflation_log;
  std::vector<Matrix> basis_blocks;  // V_1..V_m; kept with full reorthogonalization
  bool exhausted = false;            // the next block deflated to rank zero
  double operator_scale = 0.0;       // reference magnitude used by the rank test
  double rank_tol = 0.0;
  Reorthogonalization reorth = Reorthogonalization::full;

  Index krylov_dim() const { return t.rows(); }
  Matrix stacked_basis() const;

  /// The factorization after the first `steps` block steps.
  BlockLanczosFactorization truncated(int steps) const;
};

/// Block Lanczos recurrence on an already-projected symmetric operator.
/// Rank-revealing QR (column-pivoted Householder) drops directions whose
/// R-diagonal is below rank_tol * max(leading R-diagonal, operator scale);
/// `reference_scale` seeds the operator scale. `project` is re-applied to
/// every new block after reorthogonalization.
BlockLanczosFactorization lanczos_recurrence(const LinearOperator& op, const Matrix& start,
                                             const LanczosOptions& options, double reference_scale,
                                             const std::function<Matrix(const Matrix&)>& project = {});

/// Runs the recurrence with Z_0 = Q_v (A Phi) and operator Q_v A Q_v applied
/// matrix-free. Throws an operator error if `apply_a` is not symmetric.
BlockLanczosFactorization block_lanczos(const LinearOperator& apply_a, const CGBasis& basis,
                                        const LanczosOptions& options = {});

/// Spectral data of T_m used to evaluate the approximate kernels and noise.
class KrylovKernelEvaluator {
 public:
  explicit KrylovKernelEvaluator(BlockLanczosFactorization factorization,
                                 double null_threshold = kDefaultNullThreshold);

  const BlockLanczosFactorization& factorization() const { return factorization_; }
  const Vector& eigenvalues() const { return mu_; }
  const Matrix& eigenvectors() const { return u_; }
  const std::vector<Index>& dropped() const { return dropped_; }
  double null_cutoff() const { return null_cutoff_; }
  Index size() const { return factorization_.start_columns; }
  std::string source() const;

  /// E_1 R0, the P x M embedding of the starting factor.
  Matrix embedding() const;
  /// Retained eigenvalues of T_m.
  const Vector& retained_eigenvalues() const { return retained_mu_; }
  /// M x K matrix whose columns are the rows of U^T E_1 R0 for retained modes.
  const Matrix& retained_coupling() const { return coupling_; }

 private:
  BlockLanczosFactorization factorization_;
  Vector mu_;
  Matrix u_;
  std::vector<Index> dropped_;
  double null_cutoff_ = 0.0;
  Vector retained_mu_;
  Matrix coupling_;
};

KernelSeries theta_krylov(const KrylovKernelEvaluator& evaluator, std::span<const double> times);
KernelSeries beta_krylov(const KrylovKernelEvaluator& evaluator, std::span<const double> times);

/// Single-vector estimate ||Q A phi_k||^2 e_1^T T_m^{-1} e_1 of theta_kk(0);
/// `k` is a 0-based column index.
double theta_kk_scalar(const HessianModel& model, const CGBasis& basis, Index k, int order,
                       double rank_tol = 1e-10, double null_threshold = kDefaultNullThreshold);

struct ConvergenceRow {
  int order = 0;
  Index krylov_dim = 0;
  bool exhausted = false;
  double max_error = 0.0;        // over the whole grid
  double early_max_error = 0.0;  // over t <= early_limit
};

struct ConvergenceReport {
  bool oracle = false;  // false: errors are successive differences between orders m and m+1
  double early_limit = 0.0;
  std::vector<ConvergenceRow> rows;
  std::vector<KernelSeries> theta;  // one per row
  std::optional<KernelSeries> exact;
};

ConvergenceReport convergence_report(const HessianModel& model, const CGBasis& basis, std::span<const int> orders,
                                     std::span<const double> times, const LanczosOptions& options = {},
                                     double early_fraction = 0.1);

/// JSON header (order, block sizes, deflation log, ...) plus T and R0 as dense CSV.
void dump_factorization(const BlockLanczosFactorization& f, const std::filesystem::path& dir,
                        const std::string& stem = "factorization");
nlohmann::json factorization_summary(const BlockLanczosFactorization& f);

}  // namespace mzkernel
