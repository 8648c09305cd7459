#include "mzkernel/kernel_series.hpp"

#include "mzkernel/error.hpp"
#include "mzkernel/io.hpp"
#include "mzkernel/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mzkernel {

std::string_view to_string(KernelKind kind) { return kind == KernelKind::theta ? "theta" : "beta"; }

std::vector<double> uniform_grid(double t_max, Index n_points) {
  if (!(t_max > 0.0)) throw Error(ErrorCode::grid, "t_max must be positive");
  if (n_points < 2) throw Error(ErrorCode::grid, "a grid needs at least two points");
  std::vector<double> t(static_cast<std::size_t>(n_points));
  for (Index i = 0; i < n_points; ++i)
    t[static_cast<std::size_t>(i)] = t_max * static_cast<double>(i) / static_cast<double>(n_points - 1);
  return t;
}

void check_grid(std::span<const double> times) {
  if (times.empty()) throw Error(ErrorCode::grid, "time grid is empty");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i])) throw Error(ErrorCode::grid, "time grid contains a non-finite value");
    if (i > 0 && !(times[i] > times[i - 1])) throw Error(ErrorCode::grid, "time grid must be strictly ascending");
  }
}

void write_kernel_csv(const KernelSeries& series, const std::filesystem::path& path) {
  const Index m = series.size();
  const std::string prefix(to_string(series.kind));
  std::string out = "t";
  for (Index i = 0; i < m; ++i)
    for (Index j = i; j < m; ++j) out += "," + prefix + "_" + std::to_string(i + 1) + "_" + std::to_string(j + 1);
  out += '\n';
  for (std::size_t k = 0; k < series.times.size(); ++k) {
    out += io::format_double(series.times[k]);
    const Matrix& v = series.values[k];
    for (Index i = 0; i < m; ++i)
      for (Index j = i; j < m; ++j) {
        out += ',';
        out += io::format_double(v(i, j));
      }
    out += '\n';
  }
  io::write_text(path, out);
}

KernelSeries read_kernel_csv(const std::filesystem::path& path) {
  std::istringstream in(io::read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::io, path.string() + ": empty kernel file");
  std::vector<std::string> header;
  {
    std::istringstream h(line);
    std::string field;
    while (std::getline(h, field, ',')) header.push_back(field);
  }
  if (header.empty() || header.front() != "t") throw Error(ErrorCode::io, path.string() + ": header must start with t");
  const auto n_fields = static_cast<Index>(header.size()) - 1;
  Index m = 0;
  while (m * (m + 1) / 2 < n_fields) ++m;
  if (m * (m + 1) / 2 != n_fields) throw Error(ErrorCode::io, path.string() + ": field count is not triangular");

  KernelSeries series;
  if (m > 0) {
    const std::string& first = header[1];
    if (first.rfind("theta_", 0) == 0)
      series.kind = KernelKind::theta;
    else if (first.rfind("beta_", 0) == 0)
      series.kind = KernelKind::beta;
    else
      throw Error(ErrorCode::io, path.string() + ": unknown kernel column '" + first + "'");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    std::getline(row, field, ',');
    series.times.push_back(io::parse_double(field));
    Matrix v(m, m);
    for (Index i = 0; i < m; ++i)
      for (Index j = i; j < m; ++j) {
        if (!std::getline(row, field, ',')) throw Error(ErrorCode::io, path.string() + ": short row");
        v(i, j) = io::parse_double(field);
        v(j, i) = v(i, j);
      }
    series.values.push_back(std::move(v));
  }
  return series;
}

nlohmann::json kernel_metadata(const KernelSeries& series) {
  return {{"kind", to_string(series.kind)},
          {"source", series.source},
          {"units", series.units},
          {"M", series.size()},
          {"points", series.times.size()},
          {"dropped_modes", series.dropped_modes}};
}

std::vector<double> relative_errors(const KernelSeries& approx, const KernelSeries& reference) {
  if (approx.values.size() != reference.values.size())
    throw Error(ErrorCode::grid, "kernel series have different grid lengths");
  double largest = 0.0;
  for (const auto& v : reference.values) largest = std::max(largest, v.norm());
  std::vector<double> errors(reference.values.size());
  for (std::size_t k = 0; k < errors.size(); ++k) {
    const double diff = (approx.values[k] - reference.values[k]).norm();
    const double denom = std::max(reference.values[k].norm(), 1e-12 * largest);
    errors[k] = denom > 0.0 ? diff / denom : diff;
  }
  return errors;
}

double max_error_until(std::span<const double> times, std::span<const double> errors, double t_limit) {
  double worst = 0.0;
  for (std::size_t k = 0; k < times.size() && k < errors.size(); ++k)
    if (times[k] <= t_limit) worst = std::max(worst, errors[k]);
  return worst;
}

InvariantReport check_invariants(const KernelSeries& series) {
  InvariantReport r;
  if (series.values.empty()) return r;
  for (const auto& v : series.values) r.max_asymmetry = std::max(r.max_asymmetry, asymmetry(v));
  const double scale = std::max(1.0, [&] {
    double s = 0.0;
    for (const auto& v : series.values) s = std::max(s, max_abs(v));
    return s;
  }());
  r.pass = r.max_asymmetry <= 1e-12 * scale;
  if (series.kind != KernelKind::theta) return r;

  const Matrix& t0 = series.values.front();
  const Vector e0 = symmetric_eigen(t0).values;
  r.min_eig_theta0 = e0.size() ? e0(0) : 0.0;
  r.max_eig_theta0 = e0.size() ? e0(e0.size() - 1) : 0.0;
  const double tol = 1e-10 * std::max(r.max_eig_theta0, 0.0);
  for (std::size_t k = 1; k < series.values.size(); ++k) {
    const Matrix& v = series.values[k];
    const Vector e = symmetric_eigen(t0 - v).values;
    if (e.size()) r.min_eig_decay = std::min(r.min_eig_decay, e(0));
    for (Index i = 0; i < v.rows(); ++i)
      r.max_diag_excess = std::max(r.max_diag_excess, std::abs(v(i, i)) - t0(i, i));
  }
  r.pass = r.pass && r.min_eig_theta0 >= -tol && r.min_eig_decay >= -tol && r.max_diag_excess <= tol;
  return r;
}

nlohmann::json to_json(const InvariantReport& r) {
  return {{"max_asymmetry", r.max_asymmetry},     {"min_eig_theta0", r.min_eig_theta0},
          {"max_eig_theta0", r.max_eig_theta0},   {"min_eig_decay", r.min_eig_decay},
          {"max_diag_excess", r.max_diag_excess}, {"pass", r.pass}};
}

}  // namespace mzkernel
