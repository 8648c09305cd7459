#include "mzkernel/config.hpp"

#include "mzkernel/error.hpp"
#include "mzkernel/io.hpp"
#include "mzkernel/kernel_series.hpp"

#include <algorithm>
#include <random>
#include <set>

namespace mzkernel {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& section, std::string_view where, std::initializer_list<std::string_view> known) {
  if (!section.is_object()) throw Error(ErrorCode::config, std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : section.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw Error(ErrorCode::config, "unknown key '" + key + "' in " + std::string(where));
  }
}

template <typename T>
void read(const json& section, const char* key, T& out) {
  if (!section.contains(key)) return;
  try {
    out = section.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config, std::string("bad value for '") + key + "': " + e.what());
  }
}

std::string resolve(const std::string& path, const fs::path& base) {
  if (path.empty() || base.empty() || fs::path(path).is_absolute()) return path;
  return (base / path).lexically_normal().string();
}

}  // namespace

RunConfig RunConfig::from_json(const json& doc, const fs::path& base_dir) {
  reject_unknown(doc, "config",
                 {"model", "basis", "grid", "krylov", "noise", "convergence", "coarsen", "tolerances", "units",
                  "output_dir"});
  RunConfig c;
  if (doc.contains("model")) {
    const auto& m = doc.at("model");
    reject_unknown(m, "model",
                   {"kind", "n_atoms", "spring_constant", "masses", "mass", "boundary", "positions", "cutoff", "seed",
                    "spacing", "jitter", "mass_min", "mass_max", "path", "format", "sidecar"});
    auto& mc = c.model;
    read(m, "kind", mc.kind);
    read(m, "n_atoms", mc.n_atoms);
    read(m, "spring_constant", mc.spring_constant);
    read(m, "masses", mc.masses);
    if (m.contains("mass")) {
      double mass = 1.0;
      read(m, "mass", mass);
      mc.masses.assign(static_cast<std::size_t>(std::max<Index>(mc.n_atoms, 0)), mass);
    }
    read(m, "boundary", mc.boundary);
    read(m, "positions", mc.positions);
    read(m, "cutoff", mc.cutoff);
    read(m, "seed", mc.seed);
    read(m, "spacing", mc.spacing);
    read(m, "jitter", mc.jitter);
    read(m, "mass_min", mc.mass_min);
    read(m, "mass_max", mc.mass_max);
    read(m, "path", mc.path);
    read(m, "format", mc.format);
    read(m, "sidecar", mc.sidecar);
    mc.path = resolve(mc.path, base_dir);
    mc.sidecar = resolve(mc.sidecar, base_dir);
  }
  if (doc.contains("basis")) {
    const auto& b = doc.at("basis");
    reject_unknown(b, "basis",
                   {"kind", "partition", "blocks", "block_size", "mode", "path", "M", "skip_null", "seed", "columns"});
    auto& bc = c.basis;
    read(b, "kind", bc.kind);
    read(b, "partition", bc.partition);
    read(b, "blocks", bc.blocks);
    read(b, "block_size", bc.block_size);
    read(b, "mode", bc.mode);
    read(b, "path", bc.path);
    read(b, "M", bc.m);
    read(b, "skip_null", bc.skip_null);
    read(b, "seed", bc.seed);
    read(b, "columns", bc.columns);
    bc.partition = resolve(bc.partition, base_dir);
    bc.path = resolve(bc.path, base_dir);
  } else if (c.model.kind == "demo") {
    c.basis.kind = "matrix";
    c.basis.columns = {{1.0, 0.0}};
  }
  if (doc.contains("grid")) {
    reject_unknown(doc.at("grid"), "grid", {"t_max", "n_points"});
    read(doc.at("grid"), "t_max", c.t_max);
    read(doc.at("grid"), "n_points", c.n_points);
  }
  if (doc.contains("krylov")) {
    reject_unknown(doc.at("krylov"), "krylov", {"order", "rank_tol", "reorth"});
    read(doc.at("krylov"), "order", c.order);
    read(doc.at("krylov"), "rank_tol", c.rank_tol);
    read(doc.at("krylov"), "reorth", c.reorth);
  }
  if (doc.contains("noise")) {
    reject_unknown(doc.at("noise"), "noise", {"kBT", "samples", "seed", "lags"});
    read(doc.at("noise"), "kBT", c.kbt);
    read(doc.at("noise"), "samples", c.samples);
    read(doc.at("noise"), "seed", c.seed);
    read(doc.at("noise"), "lags", c.lags);
  }
  if (doc.contains("convergence")) {
    reject_unknown(doc.at("convergence"), "convergence", {"orders"});
    read(doc.at("convergence"), "orders", c.orders);
  }
  if (doc.contains("coarsen")) {
    reject_unknown(doc.at("coarsen"), "coarsen", {"partitions", "block_sizes"});
    read(doc.at("coarsen"), "partitions", c.partitions);
    read(doc.at("coarsen"), "block_sizes", c.block_sizes);
    for (auto& p : c.partitions) p = resolve(p, base_dir);
  }
  if (doc.contains("tolerances")) {
    reject_unknown(doc.at("tolerances"), "tolerances", {"null_threshold", "orthonormality"});
    read(doc.at("tolerances"), "null_threshold", c.null_threshold);
    read(doc.at("tolerances"), "orthonormality", c.orthonormality_tol);
  }
  read(doc, "units", c.units);
  read(doc, "output_dir", c.output_dir);
  c.output_dir = resolve(c.output_dir, base_dir);
  c.validate();
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  return from_json(io::read_json(path), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

json RunConfig::to_json() const {
  json model = {{"kind", this->model.kind}};
  const auto& mc = this->model;
  if (mc.kind == "chain") {
    model.update({{"n_atoms", mc.n_atoms}, {"spring_constant", mc.spring_constant}, {"masses", mc.masses},
                  {"boundary", mc.boundary}});
  } else if (mc.kind == "network") {
    model.update({{"positions", mc.positions}, {"masses", mc.masses}, {"cutoff", mc.cutoff},
                  {"spring_constant", mc.spring_constant}});
  } else if (mc.kind == "lattice_network") {
    model.update({{"n_atoms", mc.n_atoms}, {"seed", mc.seed}, {"spacing", mc.spacing}, {"jitter", mc.jitter},
                  {"mass_min", mc.mass_min}, {"mass_max", mc.mass_max}, {"cutoff", mc.cutoff},
                  {"spring_constant", mc.spring_constant}});
  } else if (mc.kind == "file") {
    model.update({{"path", mc.path}, {"format", mc.format}, {"sidecar", mc.sidecar}});
  }

  json basis_doc = {{"kind", basis.kind}};
  if (basis.kind == "rtb") {
    basis_doc.update({{"partition", basis.partition}, {"blocks", basis.blocks}, {"block_size", basis.block_size},
                      {"mode", basis.mode}});
  } else if (basis.kind == "file") {
    basis_doc["path"] = basis.path;
  } else if (basis.kind == "lowest_modes") {
    basis_doc.update({{"M", basis.m}, {"skip_null", basis.skip_null}});
  } else if (basis.kind == "random") {
    basis_doc.update({{"M", basis.m}, {"seed", basis.seed}});
  } else if (basis.kind == "matrix") {
    basis_doc["columns"] = basis.columns;
  }

  return {{"model", model},
          {"basis", basis_doc},
          {"grid", {{"t_max", t_max}, {"n_points", n_points}}},
          {"krylov", {{"order", order}, {"rank_tol", rank_tol}, {"reorth", reorth}}},
          {"noise", {{"kBT", kbt}, {"samples", samples}, {"seed", seed}, {"lags", lags}}},
          {"convergence", {{"orders", orders}}},
          {"coarsen", {{"partitions", partitions}, {"block_sizes", block_sizes}}},
          {"tolerances", {{"null_threshold", null_threshold}, {"orthonormality", orthonormality_tol}}},
          {"units", units},
          {"output_dir", output_dir}};
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::config, msg); };
  if (!(t_max > 0.0)) fail("grid.t_max must be positive");
  if (n_points < 2) fail("grid.n_points must be at least 2");
  if (order < 1) fail("krylov.order must be at least 1");
  if (!(rank_tol > 0.0 && rank_tol < 1.0)) fail("krylov.rank_tol must lie in (0, 1)");
  if (reorth != "full" && reorth != "local") fail("krylov.reorth must be full or local");
  if (!(null_threshold > 0.0 && null_threshold < 1.0)) fail("tolerances.null_threshold must lie in (0, 1)");
  if (!(orthonormality_tol > 0.0 && orthonormality_tol < 1.0)) fail("tolerances.orthonormality must lie in (0, 1)");
  if (!(kbt > 0.0)) fail("noise.kBT must be positive");
  if (samples < 1) fail("noise.samples must be at least 1");
  for (int m : orders)
    if (m < 1) fail("convergence.orders must be positive");
  static const std::set<std::string> models = {"demo", "chain", "network", "lattice_network", "file"};
  if (!models.contains(model.kind)) fail("unknown model kind '" + model.kind + "'");
  static const std::set<std::string> bases = {"rtb", "file", "lowest_modes", "matrix", "random"};
  if (!bases.contains(basis.kind)) fail("unknown basis kind '" + basis.kind + "'");
}

std::vector<double> RunConfig::grid() const { return uniform_grid(t_max, n_points); }

LanczosOptions RunConfig::lanczos_options() const {
  LanczosOptions o;
  o.order = order;
  o.rank_tol = rank_tol;
  o.reorth = parse_reorthogonalization(reorth);
  return o;
}

HessianModel build_model(const ModelConfig& c, const std::string& units) {
  auto with_units = [&units](const HessianModel& m) {
    return HessianModel(m.hessian(), m.geometry(), m.dimensionality(), m.label(), units, m.input_asymmetry());
  };
  auto masses_or_unit = [&c](std::size_t n) {
    if (c.masses.empty()) return std::vector<double>(n, 1.0);
    return c.masses;
  };
  if (c.kind == "demo") {
    const std::vector<double> unit{1.0, 1.0};
    auto m = build_harmonic_chain(2, 1.0, unit, Boundary::fixed);
    return HessianModel(m.hessian(), m.geometry(), m.dimensionality(), "2x2 demo [[2,-1],[-1,2]]", units);
  }
  if (c.kind == "chain") {
    Boundary boundary = Boundary::free;
    if (c.boundary == "fixed")
      boundary = Boundary::fixed;
    else if (c.boundary != "free")
      throw Error(ErrorCode::config, "chain boundary must be free or fixed");
    const auto masses = masses_or_unit(static_cast<std::size_t>(std::max<Index>(c.n_atoms, 0)));
    return with_units(build_harmonic_chain(c.n_atoms, c.spring_constant, masses, boundary));
  }
  if (c.kind == "network") {
    Geometry g;
    for (const auto& p : c.positions) {
      if (p.size() != 3) throw Error(ErrorCode::config, "network positions must be 3-vectors");
      g.positions.emplace_back(p[0], p[1], p[2]);
    }
    g.masses = masses_or_unit(g.positions.size());
    return with_units(build_spring_network(g, c.cutoff, c.spring_constant));
  }
  if (c.kind == "lattice_network") {
    if (c.n_atoms < 2) throw Error(ErrorCode::invalid_model, "a network needs at least two atoms");
    const auto g = lattice_geometry(static_cast<std::size_t>(c.n_atoms), c.seed, c.spacing, c.jitter, c.mass_min,
                                    c.mass_max);
    return with_units(build_spring_network(g, c.cutoff, c.spring_constant));
  }
  if (c.kind == "file") {
    const auto sidecar = c.sidecar.empty() ? std::nullopt : std::optional<fs::path>(c.sidecar);
    return with_units(load_hessian(c.path, parse_hessian_format(c.format), sidecar));
  }
  throw Error(ErrorCode::config, "unknown model kind '" + c.kind + "'");
}

CGBasis build_basis(const BasisConfig& c, const HessianModel& model) {
  if (c.kind == "rtb") {
    BlockPartition partition;
    if (!c.partition.empty())
      partition = load_partition(c.partition);
    else if (!c.blocks.empty())
      partition.blocks = c.blocks;
    else if (c.block_size > 0)
      partition = BlockPartition::uniform(model.geometry().count(), static_cast<std::size_t>(c.block_size));
    else
      throw Error(ErrorCode::config, "rtb basis needs partition, blocks or block_size");
    RtbMode mode = model.dof_per_atom() == 3 ? RtbMode::three_d : RtbMode::one_d;
    if (c.mode == "1d")
      mode = RtbMode::one_d;
    else if (c.mode == "3d")
      mode = RtbMode::three_d;
    else if (c.mode != "auto")
      throw Error(ErrorCode::config, "rtb mode must be 1d, 3d or auto");
    return build_rtb_basis(model, partition, mode);
  }
  if (c.kind == "file") return load_basis(c.path, model.dim());
  if (c.kind == "lowest_modes") return lowest_modes_basis(model, c.m, c.skip_null);
  if (c.kind == "random") {
    if (c.m < 1) throw Error(ErrorCode::config, "random basis needs M >= 1");
    std::mt19937_64 rng(c.seed);
    std::normal_distribution<double> normal;
    Matrix raw(model.dim(), c.m);
    for (Index j = 0; j < raw.cols(); ++j)
      for (Index i = 0; i < raw.rows(); ++i) raw(i, j) = normal(rng);
    return basis_from_matrix(raw, BasisProvenance::file);
  }
  if (c.kind == "matrix") {
    if (c.columns.empty()) throw Error(ErrorCode::empty_basis, "matrix basis has no columns");
    Matrix raw(model.dim(), static_cast<Index>(c.columns.size()));
    for (std::size_t j = 0; j < c.columns.size(); ++j) {
      if (static_cast<Index>(c.columns[j].size()) != model.dim())
        throw Error(ErrorCode::shape, "basis column " + std::to_string(j) + " has the wrong length");
      for (Index i = 0; i < model.dim(); ++i) raw(i, static_cast<Index>(j)) = c.columns[j][static_cast<std::size_t>(i)];
    }
    return basis_from_matrix(raw, BasisProvenance::file);
  }
  throw Error(ErrorCode::config, "unknown basis kind '" + c.kind + "'");
}

}  // namespace mzkernel
