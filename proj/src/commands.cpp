#include "mzkernel/commands.hpp"

#include "mzkernel/exact_kernel.hpp"
#include "mzkernel/io.hpp"
#include "mzkernel/kernel_series.hpp"
#include "mzkernel/krylov_kernel.hpp"
#include "mzkernel/noise.hpp"

#include <algorithm>
#include <cmath>

namespace mzkernel {

namespace fs = std::filesystem;
using nlohmann::json;

KernelMethod parse_kernel_method(std::string_view name) {
  if (name == "exact") return KernelMethod::exact;
  if (name == "krylov") return KernelMethod::krylov;
  if (name == "both") return KernelMethod::both;
  throw Error(ErrorCode::config, "method must be exact, krylov or both, got '" + std::string(name) + "'");
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::policy_refusal:
      return kExitPolicy;
    case ErrorCode::consistency:
      return kExitCheck;
    default:
      return kExitUsage;
  }
}

namespace {

struct Run {
  RunConfig config;
  fs::path out;
  CommandResult result;

  void json_file(const std::string& name, const json& doc) {
    io::write_json(out / name, doc);
    result.files.emplace_back(name);
  }
  void series_file(const std::string& name, const KernelSeries& series) {
    write_kernel_csv(series, out / name);
    result.files.emplace_back(name);
  }
  void text_file(const std::string& name, const std::string& text) {
    io::write_text(out / name, text);
    result.files.emplace_back(name);
  }
};

Run start(const RunConfig& config, const fs::path& out, const std::string& command) {
  config.validate();
  Run run{config, out, {}};
  json doc = config.to_json();
  // the output location is not part of the run, so reruns elsewhere match
  doc.erase("output_dir");
  run.json_file("run.json", {{"command", command}, {"config", doc}});
  return run;
}

json model_summary(const HessianModel& model) {
  return {{"label", model.label()},
          {"dim", model.dim()},
          {"atoms", model.geometry().count()},
          {"dof_per_atom", model.dof_per_atom()},
          {"units", model.units()},
          {"input_asymmetry", model.input_asymmetry()}};
}

json basis_summary(const CGBasis& basis) {
  return {{"M", basis.size()},
          {"provenance", to_string(basis.provenance())},
          {"block_local", basis.block_local()},
          {"dropped_candidates", basis.dropped_candidates()}};
}

KernelSeries with_units(KernelSeries s, const std::string& units) {
  s.units = units;
  return s;
}

std::string error_table(std::span<const double> times, const std::vector<std::vector<double>>& columns,
                        const std::vector<std::string>& names) {
  std::string out = "t";
  for (const auto& n : names) out += "," + n;
  out += '\n';
  for (std::size_t k = 0; k < times.size(); ++k) {
    out += io::format_double(times[k]);
    for (const auto& c : columns) out += "," + io::format_double(c[k]);
    out += '\n';
  }
  return out;
}

double max_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  return m;
}

double max_diagonal(const Matrix& m) { return m.rows() ? m.diagonal().maxCoeff() : 0.0; }

}  // namespace

CommandResult cmd_kernel(const RunConfig& config, KernelMethod method, const fs::path& out) {
  Run run = start(config, out, "kernel");
  const auto model = build_model(config.model, config.units);
  const auto basis = build_basis(config.basis, model);
  const auto times = config.grid();
  if (method != KernelMethod::krylov) check_dense_oracle_policy(model.dim());

  bool invariants_ok = true;
  json meta = {{"model", model_summary(model)}, {"basis", basis_summary(basis)}};

  std::optional<KernelSeries> theta_ex, beta_ex, theta_kr, beta_kr;
  if (method != KernelMethod::krylov) {
    const auto spectrum = compute_spectrum(model, basis, config.null_threshold);
    theta_ex = with_units(theta_exact(spectrum, times), config.units);
    beta_ex = with_units(beta_exact(spectrum, times), config.units);
    run.series_file("theta_exact.csv", *theta_ex);
    run.series_file("beta_exact.csv", *beta_ex);
    const auto inv_t = check_invariants(*theta_ex);
    const auto inv_b = check_invariants(*beta_ex);
    invariants_ok = invariants_ok && inv_t.pass && inv_b.pass;
    json m = meta;
    m.update({{"theta", kernel_metadata(*theta_ex)},
              {"beta", kernel_metadata(*beta_ex)},
              {"null_cutoff", spectrum.null_cutoff},
              {"complement_dim", spectrum.lambdas.size()},
              {"invariants", {{"theta", to_json(inv_t)}, {"beta", to_json(inv_b)}}}});
    run.json_file("kernel_exact.json", m);
  }

  std::optional<KrylovKernelEvaluator> evaluator;
  if (method != KernelMethod::exact) {
    const auto f = block_lanczos(model.operator_A(), basis, config.lanczos_options());
    evaluator.emplace(f, config.null_threshold);
    theta_kr = with_units(theta_krylov(*evaluator, times), config.units);
    beta_kr = with_units(beta_krylov(*evaluator, times), config.units);
    run.series_file("theta_krylov.csv", *theta_kr);
    run.series_file("beta_krylov.csv", *beta_kr);
    dump_factorization(f, out, "factorization");
    for (const char* name : {"factorization.json", "factorization_T.csv", "factorization_R0.csv"})
      run.result.files.emplace_back(name);
    const auto inv_t = check_invariants(*theta_kr);
    const auto inv_b = check_invariants(*beta_kr);
    invariants_ok = invariants_ok && inv_t.pass && inv_b.pass;
    json m = meta;
    m.update({{"theta", kernel_metadata(*theta_kr)},
              {"beta", kernel_metadata(*beta_kr)},
              {"null_cutoff", evaluator->null_cutoff()},
              {"factorization", factorization_summary(f)},
              {"invariants", {{"theta", to_json(inv_t)}, {"beta", to_json(inv_b)}}}});
    run.json_file("kernel_krylov.json", m);
  }

  if (method == KernelMethod::both) {
    const auto et = relative_errors(*theta_kr, *theta_ex);
    const auto eb = relative_errors(*beta_kr, *beta_ex);
    run.text_file("comparison.csv", error_table(times, {et, eb}, {"theta_rel_error", "beta_rel_error"}));
    run.json_file("comparison.json", {{"order", config.order},
                                      {"krylov_dim", evaluator->factorization().krylov_dim()},
                                      {"exhausted", evaluator->factorization().exhausted},
                                      {"theta_max_rel_error", max_of(et)},
                                      {"beta_max_rel_error", max_of(eb)}});
    run.result.summary = "max relative error theta " + io::format_double(max_of(et)) + ", beta " +
                         io::format_double(max_of(eb));
  } else if (method == KernelMethod::krylov) {
    // Without an oracle the only convergence signal is the change from order m-1 to m.
    const auto& f = evaluator->factorization();
    json diag = {{"order", config.order}, {"steps", f.steps}, {"exhausted", f.exhausted}};
    if (f.steps >= 2) {
      const KrylovKernelEvaluator prev(f.truncated(f.steps - 1), config.null_threshold);
      const auto et = relative_errors(*theta_kr, theta_krylov(prev, times));
      const auto eb = relative_errors(*beta_kr, beta_krylov(prev, times));
      run.text_file("diagnostics.csv", error_table(times, {et, eb}, {"theta_successive", "beta_successive"}));
      diag.update({{"compared_orders", {f.steps - 1, f.steps}},
                   {"theta_max_successive_difference", max_of(et)},
                   {"beta_max_successive_difference", max_of(eb)}});
    } else {
      diag["compared_orders"] = json::array();
    }
    run.json_file("diagnostics.json", diag);
    run.result.summary = "krylov order " + std::to_string(f.steps) + ", dimension " + std::to_string(f.krylov_dim());
  } else {
    run.result.summary = "exact kernels on " + std::to_string(times.size()) + " points";
  }

  if (!invariants_ok) {
    run.result.exit_code = kExitCheck;
    run.result.summary += "; kernel invariants violated";
  }
  return run.result;
}

CommandResult cmd_convergence(const RunConfig& config, const fs::path& out) {
  Run run = start(config, out, "convergence");
  const auto model = build_model(config.model, config.units);
  check_dense_oracle_policy(model.dim());
  const auto basis = build_basis(config.basis, model);
  const auto times = config.grid();

  const auto report = convergence_report(model, basis, config.orders, times, config.lanczos_options());
  std::string table = "order,krylov_dim,exhausted,max_rel_error,early_max_rel_error\n";
  json rows = json::array();
  bool monotone = true;
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& r = report.rows[i];
    table += std::to_string(r.order) + "," + std::to_string(r.krylov_dim) + "," + (r.exhausted ? "1" : "0") + "," +
             io::format_double(r.max_error) + "," + io::format_double(r.early_max_error) + "\n";
    rows.push_back({{"order", r.order},
                    {"krylov_dim", r.krylov_dim},
                    {"exhausted", r.exhausted},
                    {"max_rel_error", r.max_error},
                    {"early_max_rel_error", r.early_max_error}});
    if (i > 0 && r.order > report.rows[i - 1].order && r.max_error > report.rows[i - 1].max_error) monotone = false;
    run.series_file("theta_krylov_m" + std::to_string(r.order) + ".csv",
                    with_units(report.theta[i], config.units));
  }
  if (report.exact) run.series_file("theta_exact.csv", with_units(*report.exact, config.units));
  run.text_file("convergence.csv", table);
  run.json_file("convergence.json", {{"model", model_summary(model)},
                                     {"basis", basis_summary(basis)},
                                     {"reference", report.oracle ? "exact" : "next order"},
                                     {"early_limit", report.early_limit},
                                     {"monotone", monotone},
                                     {"rows", rows}});
  run.result.summary = std::to_string(report.rows.size()) + " orders, monotone: " + (monotone ? "yes" : "no");
  return run.result;
}

CommandResult cmd_coarsen(const RunConfig& config, const fs::path& out) {
  Run run = start(config, out, "coarsen");
  const auto model = build_model(config.model, config.units);
  check_dense_oracle_policy(model.dim());
  const auto times = config.grid();
  const RtbMode mode = model.dof_per_atom() == 3 ? RtbMode::three_d : RtbMode::one_d;

  struct Entry {
    std::string label;
    BlockPartition partition;
  };
  std::vector<Entry> entries;
  for (const auto& path : config.partitions) entries.push_back({fs::path(path).filename().string(), load_partition(path)});
  for (Index b : config.block_sizes) {
    if (b < 1) throw Error(ErrorCode::config, "coarsen block sizes must be positive");
    entries.push_back({"uniform_" + std::to_string(b),
                       BlockPartition::uniform(model.geometry().count(), static_cast<std::size_t>(b))});
  }
  if (entries.empty()) throw Error(ErrorCode::config, "coarsen needs partitions or block_sizes");

  json rows = json::array();
  std::vector<double> maxima;  // accepted rows only, in listed order
  bool all_accepted = true;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    e.partition.validate(model.geometry().count());
    json row = {{"index", i}, {"label", e.label}, {"blocks", e.partition.blocks.size()}};
    std::optional<CGBasis> basis;
    try {
      basis.emplace(build_rtb_basis(model, e.partition, mode));
    } catch (const Error& err) {
      if (err.code() != ErrorCode::size && err.code() != ErrorCode::empty_basis) throw;
      row.update({{"status", "rejected"}, {"reason", err.what()}});
      all_accepted = false;
      rows.push_back(row);
      continue;
    }
    const auto spectrum = compute_spectrum(model, *basis, config.null_threshold);
    const auto theta = theta_exact(spectrum, times);
    std::vector<double> trace(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) trace[k] = theta.values[k].trace();
    const std::string trace_name = "trace_" + std::to_string(i) + ".csv";
    run.text_file(trace_name, error_table(times, {trace}, {"trace_theta"}));
    const double max_diag = max_diagonal(theta.values.front());
    maxima.push_back(max_diag);
    row.update({{"status", "ok"},
                {"M", basis->size()},
                {"max_diag_theta0", max_diag},
                {"trace_theta0", trace.front()},
                {"trace_file", trace_name}});
    rows.push_back(row);
  }

  // rank 1 = largest theta(0) diagonal maximum
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i]["status"] == "ok") order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rows[a]["max_diag_theta0"].get<double>() > rows[b]["max_diag_theta0"].get<double>();
  });
  for (std::size_t r = 0; r < order.size(); ++r) rows[order[r]]["rank"] = r + 1;

  bool decreasing = maxima.size() >= 2 && all_accepted;
  for (std::size_t i = 1; i < maxima.size(); ++i) decreasing = decreasing && maxima[i] < maxima[i - 1];

  std::string table = "index,label,blocks,status,M,max_diag_theta0,trace_theta0,rank\n";
  for (const auto& row : rows) {
    const bool ok = row["status"] == "ok";
    table += std::to_string(row["index"].get<std::size_t>()) + "," + row["label"].get<std::string>() + "," +
             std::to_string(row["blocks"].get<std::size_t>()) + "," + row["status"].get<std::string>() + ",";
    if (ok) {
      table += std::to_string(row["M"].get<Index>()) + "," + io::format_double(row["max_diag_theta0"].get<double>()) +
               "," + io::format_double(row["trace_theta0"].get<double>()) + "," +
               std::to_string(row["rank"].get<std::size_t>());
    } else {
      table += ",,,";
    }
    table += "\n";
  }
  run.text_file("coarsen.csv", table);
  json doc = {{"model", model_summary(model)}, {"rows", rows}};
  if (maxima.size() >= 2)
    doc["strictly_decreasing"] = decreasing;
  else
    doc["strictly_decreasing"] = nullptr;  // a single data point carries no trend
  run.json_file("coarsen.json", doc);
  run.result.summary = std::to_string(rows.size()) + " partitions, strictly decreasing: " +
                       (maxima.size() >= 2 ? (decreasing ? "yes" : "no") : "n/a");
  return run.result;
}

CommandResult cmd_noise(const RunConfig& config, const fs::path& out) {
  Run run = start(config, out, "noise");
  const auto model = build_model(config.model, config.units);
  const auto basis = build_basis(config.basis, model);
  const auto times = config.grid();

  const KrylovKernelEvaluator evaluator(block_lanczos(model.operator_A(), basis, config.lanczos_options()),
                                        config.null_threshold);
  const NoiseSampler sampler(evaluator, config.kbt, config.seed);
  const auto ensemble = sample_trajectories(sampler, times, config.samples);
  write_ensemble(ensemble, out / "noise_ensemble.csv", out / "noise_ensemble.json");
  run.result.files.emplace_back("noise_ensemble.csv");
  run.result.files.emplace_back("noise_ensemble.json");

  const auto pairs = lag_pairs(times, config.lags);
  const auto report = fdt_check(ensemble, evaluator, config.kbt, pairs);
  run.json_file("fdt_report.json", to_json(report));
  run.result.exit_code = report.pass() ? kExitOk : kExitCheck;
  run.result.summary = report.pass() ? "FDT PASS" : (report.insufficient_statistics ? "FDT INSUFFICIENT_STATISTICS"
                                                                                      : "FDT FAIL");
  return run.result;
}

CommandResult cmd_info(const RunConfig& config, const fs::path& out) {
  Run run = start(config, out, "info");
  const auto model = build_model(config.model, config.units);
  const auto basis = build_basis(config.basis, model);
  const Matrix a_fp = model.dim() <= kDenseOracleLimit ? model.dense_A() : Matrix();
  json doc = {{"model", model_summary(model)},
              {"basis", basis_summary(basis)},
              {"nonzeros", model.mass_weighted().nonZeros()},
              {"dense_oracle_feasible", model.dim() <= kDenseOracleLimit},
              {"dense_oracle_limit", kDenseOracleLimit},
              {"grid", {{"t_max", config.t_max}, {"n_points", config.n_points}}}};
  if (a_fp.size()) doc["A_fingerprint"] = io::fingerprint({&a_fp});
  run.json_file("info.json", doc);
  run.result.summary = model.label() + ": dim " + std::to_string(model.dim()) + ", M " + std::to_string(basis.size());
  return run.result;
}

}  // namespace mzkernel
