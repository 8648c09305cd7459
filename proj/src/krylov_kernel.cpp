#include "mzkernel/krylov_kernel.hpp"

#include "mzkernel/error.hpp"
#include "mzkernel/io.hpp"
#include "mzkernel/spectral.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace mzkernel {

std::string_view to_string(Reorthogonalization r) { return r == Reorthogonalization::full ? "full" : "local"; }

Reorthogonalization parse_reorthogonalization(std::string_view name) {
  if (name == "full") return Reorthogonalization::full;
  if (name == "local") return Reorthogonalization::local;
  throw Error(ErrorCode::config, "unknown reorthogonalization policy '" + std::string(name) + "'");
}

namespace {

struct RankRevealed {
  Matrix q;  // n x rank
  Matrix r;  // rank x p, permuted upper triangular
};

double max_column_norm(const Matrix& x) { return x.cols() == 0 ? 0.0 : x.colwise().norm().maxCoeff(); }

// Z = Q R with column pivoting; trailing directions whose |R_ii| falls below
// rank_tol * max(|R_00|, scale) are discarded. Diagonal of the triangular
// factor is made nonnegative.
RankRevealed rank_revealing_qr(const Matrix& z, double rank_tol, double scale) {
  const Index n = z.rows();
  const Index p = z.cols();
  RankRevealed out;
  if (p == 0 || n == 0) {
    out.q.resize(n, 0);
    out.r.resize(0, p);
    return out;
  }
  Eigen::ColPivHouseholderQR<Matrix> qr(z);
  const Index k = std::min(n, p);
  const Matrix r_full = qr.matrixR().topLeftCorner(k, p).template triangularView<Eigen::Upper>();
  const double lead = std::abs(r_full(0, 0));
  const double tol = rank_tol * std::max(lead, scale);
  Index rank = 0;
  while (rank < k && std::abs(r_full(rank, rank)) > tol) ++rank;

  out.q = qr.householderQ() * Matrix::Identity(n, rank);
  Matrix r = r_full.topRows(rank);
  for (Index i = 0; i < rank; ++i) {
    if (r(i, i) < 0.0) {
      r.row(i) *= -1.0;
      out.q.col(i) *= -1.0;
    }
  }
  out.r = r * qr.colsPermutation().transpose();
  return out;
}

Matrix assemble_tridiagonal(const std::vector<Matrix>& diagonal, const std::vector<Matrix>& lower) {
  Index total = 0;
  for (const auto& d : diagonal) total += d.rows();
  Matrix t = Matrix::Zero(total, total);
  Index offset = 0;
  for (std::size_t j = 0; j < diagonal.size(); ++j) {
    const Index pj = diagonal[j].rows();
    t.block(offset, offset, pj, pj) = diagonal[j];
    if (j + 1 < diagonal.size()) {
      const Matrix& b = lower[j];  // p_{j+1} x p_j
      t.block(offset + pj, offset, b.rows(), b.cols()) = b;
      t.block(offset, offset + pj, b.cols(), b.rows()) = b.transpose();
    }
    offset += pj;
  }
  return t;
}

}  // namespace

Matrix BlockLanczosFactorization::stacked_basis() const {
  if (basis_blocks.empty()) return Matrix();
  Index cols = 0;
  for (const auto& v : basis_blocks) cols += v.cols();
  Matrix out(basis_blocks.front().rows(), cols);
  Index c = 0;
  for (const auto& v : basis_blocks) {
    out.middleCols(c, v.cols()) = v;
    c += v.cols();
  }
  return out;
}

BlockLanczosFactorization BlockLanczosFactorization::truncated(int keep) const {
  if (keep >= steps) return *this;
  BlockLanczosFactorization f = *this;
  keep = std::max(keep, 0);
  f.steps = keep;
  f.requested_order = keep;
  f.block_sizes.resize(static_cast<std::size_t>(keep));
  Index p = 0;
  for (Index s : f.block_sizes) p += s;
  f.t = t.topLeftCorner(p, p);
  if (keep == 0) f.r0.resize(0, start_columns);
  std::erase_if(f.deflation_log, [keep](const DeflationEvent& e) { return e.step > keep; });
  if (!f.basis_blocks.empty()) f.basis_blocks.resize(static_cast<std::size_t>(keep));
  f.exhausted = false;
  return f;
}

BlockLanczosFactorization lanczos_recurrence(const LinearOperator& op, const Matrix& start,
                                             const LanczosOptions& options, double reference_scale,
                                             const std::function<Matrix(const Matrix&)>& project) {
  if (options.order < 1) throw Error(ErrorCode::config, "Krylov order must be at least 1");
  if (!(options.rank_tol > 0.0 && options.rank_tol < 1.0))
    throw Error(ErrorCode::config, "rank tolerance must lie in (0, 1)");
  if (start.rows() != op.dim()) throw Error(ErrorCode::shape, "starting block does not match operator dimension");

  const bool full = options.reorth == Reorthogonalization::full;
  BlockLanczosFactorization f;
  f.requested_order = options.order;
  f.start_columns = start.cols();
  f.rank_tol = options.rank_tol;
  f.reorth = options.reorth;
  f.operator_scale = reference_scale;
  f.r0.resize(0, start.cols());

  std::vector<Matrix> diagonal;
  std::vector<Matrix> lower;
  std::vector<Matrix> stored;
  Matrix v_prev(op.dim(), 0);
  Matrix z = start;
  Index p_prev = start.cols();

  auto reorthogonalize = [&](Matrix& block, const Matrix& current) {
    for (int pass = 0; pass < 2; ++pass) {
      if (full) {
        for (const auto& v : stored) block -= v * (v.transpose() * block);
      } else {
        if (v_prev.cols() > 0) block -= v_prev * (v_prev.transpose() * block);
        block -= current * (current.transpose() * block);
      }
    }
    if (project) block = project(block);
  };

  for (int j = 1; j <= options.order; ++j) {
    // Steps 1-2: rank-revealing QR of Z_{j-1} = V_j B_{j-1}.
    auto qr = rank_revealing_qr(z, options.rank_tol, f.operator_scale);
    const Index pj = qr.q.cols();
    if (pj < p_prev) f.deflation_log.push_back({j, p_prev - pj});
    if (pj == 0) {
      f.exhausted = true;
      break;
    }
    if (j == 1)
      f.r0 = qr.r;
    else
      lower.push_back(qr.r);
    const Matrix v = std::move(qr.q);

    // Step 3: Z_j = Q A Q V_j - V_{j-1} B_{j-1}^T.
    Matrix w = op(v);
    f.operator_scale = std::max(f.operator_scale, max_column_norm(w));
    if (j > 1) w -= v_prev * lower.back().transpose();
    // Steps 4-5.
    const Matrix vw = v.transpose() * w;
    Matrix a_j = 0.5 * (vw + vw.transpose());
    w -= v * a_j;

    if (full) stored.push_back(v);
    reorthogonalize(w, v);

    diagonal.push_back(std::move(a_j));
    f.block_sizes.push_back(pj);
    f.steps = j;
    v_prev = v;
    p_prev = pj;
    z = std::move(w);
  }
  if (!f.exhausted && f.steps == options.order) {
    const auto probe = rank_revealing_qr(z, options.rank_tol, f.operator_scale);
    f.exhausted = probe.q.cols() == 0;
  }
  f.t = assemble_tridiagonal(diagonal, lower);
  if (full) f.basis_blocks = std::move(stored);
  return f;
}

BlockLanczosFactorization block_lanczos(const LinearOperator& apply_a, const CGBasis& basis,
                                        const LanczosOptions& options) {
  if (apply_a.dim() != basis.dim()) throw Error(ErrorCode::shape, "operator and basis dimensions differ");
  const double defect = symmetry_defect(apply_a);
  if (defect > 1e-8)
    throw Error(ErrorCode::operator_asymmetry, "operator is not symmetric (relative defect " + io::format_double(defect) + ")");

  const Matrix a_phi = apply_a(basis.phi());
  const Matrix start = basis.apply_qv(a_phi);
  const double scale = max_column_norm(a_phi);
  const LinearOperator projected(apply_a.dim(), [&apply_a, &basis](const Matrix& x) -> Matrix {
    return basis.apply_qv(apply_a(basis.apply_qv(x)));
  });
  return lanczos_recurrence(projected, start, options, scale,
                            [&basis](const Matrix& x) -> Matrix { return basis.apply_qv(x); });
}

KrylovKernelEvaluator::KrylovKernelEvaluator(BlockLanczosFactorization factorization, double null_threshold)
    : factorization_(std::move(factorization)) {
  const Index m = factorization_.start_columns;
  if (factorization_.krylov_dim() == 0) {
    coupling_.resize(m, 0);
    return;
  }
  auto eig = symmetric_eigen(factorization_.t);
  mu_ = std::move(eig.values);
  u_ = std::move(eig.vectors);
  null_cutoff_ = null_threshold * std::max(mu_.maxCoeff(), factorization_.operator_scale);

  const Index p1 = factorization_.r0.rows();
  const Matrix full_coupling = factorization_.r0.transpose() * u_.topRows(p1);  // M x P
  std::vector<Index> keep;
  for (Index i = 0; i < mu_.size(); ++i) {
    if (mu_(i) < -null_cutoff_)
      throw Error(ErrorCode::indefinite_hessian,
                  "T_m eigenvalue " + io::format_double(mu_(i)) + " is negative beyond the null threshold");
    if (mu_(i) <= null_cutoff_)
      dropped_.push_back(i);
    else
      keep.push_back(i);
  }
  retained_mu_.resize(static_cast<Index>(keep.size()));
  coupling_.resize(m, static_cast<Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    retained_mu_(static_cast<Index>(k)) = mu_(keep[k]);
    coupling_.col(static_cast<Index>(k)) = full_coupling.col(keep[k]);
  }
}

std::string KrylovKernelEvaluator::source() const {
  return "krylov(" + std::to_string(factorization_.requested_order) + ")";
}

Matrix KrylovKernelEvaluator::embedding() const {
  Matrix e = Matrix::Zero(factorization_.krylov_dim(), factorization_.start_columns);
  e.topRows(factorization_.r0.rows()) = factorization_.r0;
  return e;
}

KernelSeries theta_krylov(const KrylovKernelEvaluator& evaluator, std::span<const double> times) {
  auto s = evaluate_spectral_kernel(KernelKind::theta, evaluator.retained_coupling(), evaluator.retained_eigenvalues(),
                                    times);
  s.source = evaluator.source();
  s.dropped_modes = static_cast<Index>(evaluator.dropped().size());
  return s;
}

KernelSeries beta_krylov(const KrylovKernelEvaluator& evaluator, std::span<const double> times) {
  auto s = evaluate_spectral_kernel(KernelKind::beta, evaluator.retained_coupling(), evaluator.retained_eigenvalues(),
                                    times);
  s.source = evaluator.source();
  s.dropped_modes = static_cast<Index>(evaluator.dropped().size());
  return s;
}

double theta_kk_scalar(const HessianModel& model, const CGBasis& basis, Index k, int order, double rank_tol,
                       double null_threshold) {
  if (k < 0 || k >= basis.size())
    throw Error(ErrorCode::size, "column index " + std::to_string(k) + " outside basis of size " +
                                     std::to_string(basis.size()));
  const LinearOperator a = model.operator_A();
  const Matrix a_phi = a(basis.phi().col(k));
  const Matrix start = basis.apply_qv(a_phi);
  const LinearOperator projected(a.dim(), [&a, &basis](const Matrix& x) -> Matrix {
    return basis.apply_qv(a(basis.apply_qv(x)));
  });
  LanczosOptions options;
  options.order = order;
  options.rank_tol = rank_tol;
  auto f = lanczos_recurrence(projected, start, options, a_phi.norm(),
                              [&basis](const Matrix& x) -> Matrix { return basis.apply_qv(x); });
  if (f.krylov_dim() == 0) return 0.0;
  const KrylovKernelEvaluator evaluator(std::move(f), null_threshold);
  const Matrix& g = evaluator.retained_coupling();  // 1 x K, entries ||b|| U_1i
  double sum = 0.0;
  for (Index i = 0; i < g.cols(); ++i) sum += g(0, i) * g(0, i) / evaluator.retained_eigenvalues()(i);
  return sum;
}

ConvergenceReport convergence_report(const HessianModel& model, const CGBasis& basis, std::span<const int> orders,
                                     std::span<const double> times, const LanczosOptions& options,
                                     double early_fraction) {
  if (orders.empty()) throw Error(ErrorCode::config, "convergence report needs at least one order");
  check_grid(times);
  ConvergenceReport report;
  report.oracle = model.dim() <= kDenseOracleLimit;
  report.early_limit = early_fraction * times.back();

  const int top = *std::max_element(orders.begin(), orders.end());
  LanczosOptions run = options;
  run.order = report.oracle ? top : top + 1;
  const auto full = block_lanczos(model.operator_A(), basis, run);

  if (report.oracle) report.exact = theta_exact(compute_spectrum(model, basis), times);

  for (int m : orders) {
    const auto f = full.truncated(m);
    const KrylovKernelEvaluator evaluator(f);
    auto theta = theta_krylov(evaluator, times);
    theta.source = "krylov(" + std::to_string(m) + ")";
    std::vector<double> errors;
    if (report.oracle) {
      errors = relative_errors(theta, *report.exact);
    } else {
      const KrylovKernelEvaluator next(full.truncated(m + 1));
      errors = relative_errors(theta, theta_krylov(next, times));
    }
    ConvergenceRow row;
    row.order = m;
    row.krylov_dim = f.krylov_dim();
    row.exhausted = f.exhausted || (m >= full.steps && full.exhausted);
    row.max_error = max_error_until(times, errors, times.back());
    row.early_max_error = max_error_until(times, errors, report.early_limit);
    report.rows.push_back(row);
    report.theta.push_back(std::move(theta));
  }
  return report;
}

nlohmann::json factorization_summary(const BlockLanczosFactorization& f) {
  auto deflation = nlohmann::json::array();
  for (const auto& e : f.deflation_log) deflation.push_back({{"step", e.step}, {"dropped", e.dropped}});
  return {{"requested_order", f.requested_order},
          {"steps", f.steps},
          {"krylov_dim", f.krylov_dim()},
          {"M", f.start_columns},
          {"block_sizes", f.block_sizes},
          {"deflation_log", deflation},
          {"exhausted", f.exhausted},
          {"rank_tol", f.rank_tol},
          {"reorth", to_string(f.reorth)},
          {"operator_scale", f.operator_scale},
          {"fingerprint", io::fingerprint({&f.t, &f.r0})}};
}

void dump_factorization(const BlockLanczosFactorization& f, const std::filesystem::path& dir, const std::string& stem) {
  io::write_json(dir / (stem + ".json"), factorization_summary(f));
  io::write_dense_csv(dir / (stem + "_T.csv"), f.t);
  io::write_dense_csv(dir / (stem + "_R0.csv"), f.r0);
}

}  // namespace mzkernel
