#include "mzkernel/commands.hpp"
#include "mzkernel/config.hpp"
#include "mzkernel/exact_kernel.hpp"
#include "mzkernel/krylov_kernel.hpp"
#include "mzkernel/noise.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace mzkernel;

namespace {

// (n_times, M, M) array of kernel values
py::array_t<double> stack(const KernelSeries& s) {
  const auto n = static_cast<py::ssize_t>(s.values.size());
  const auto m = static_cast<py::ssize_t>(s.size());
  py::array_t<double> out({n, m, m});
  auto view = out.mutable_unchecked<3>();
  for (py::ssize_t k = 0; k < n; ++k)
    for (py::ssize_t i = 0; i < m; ++i)
      for (py::ssize_t j = 0; j < m; ++j) view(k, i, j) = s.values[k](i, j);
  return out;
}

BlockPartition partition_from(const std::vector<std::vector<Index>>& blocks) {
  BlockPartition p;
  p.blocks = blocks;
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Generalized Langevin memory kernels of harmonic systems";

  static PyObject* error_type = PyErr_NewException("mzkernel._core.Error", PyExc_RuntimeError, nullptr);
  m.attr("Error") = py::handle(error_type);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::reinterpret_borrow<py::object>(error_type)(e.what());
      inst.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type, inst.ptr());
    }
  });

  py::enum_<Boundary>(m, "Boundary").value("free", Boundary::free).value("fixed", Boundary::fixed);
  py::enum_<RtbMode>(m, "RtbMode").value("one_d", RtbMode::one_d).value("three_d", RtbMode::three_d);
  py::enum_<Reorthogonalization>(m, "Reorthogonalization")
      .value("full", Reorthogonalization::full)
      .value("local", Reorthogonalization::local);

  py::class_<Geometry>(m, "Geometry")
      .def_property_readonly("masses", [](const Geometry& g) { return g.masses; })
      .def_property_readonly("positions", [](const Geometry& g) {
        Matrix x(static_cast<Index>(g.positions.size()), 3);
        for (std::size_t i = 0; i < g.positions.size(); ++i) x.row(static_cast<Index>(i)) = g.positions[i].transpose();
        return x;
      });
  m.def("lattice_geometry", &lattice_geometry, py::arg("n_atoms"), py::arg("seed"), py::arg("spacing") = 1.0,
        py::arg("jitter") = 0.15, py::arg("mass_min") = 1.0, py::arg("mass_max") = 1.0);

  py::class_<HessianModel>(m, "HessianModel")
      .def_property_readonly("dim", &HessianModel::dim)
      .def_property_readonly("label", &HessianModel::label)
      .def_property_readonly("units", &HessianModel::units)
      .def_property_readonly("geometry", &HessianModel::geometry)
      .def("dense_A", &HessianModel::dense_A)
      .def("dense_H", &HessianModel::dense_H);
  m.def(
      "harmonic_chain",
      [](Index n, double k, std::optional<std::vector<double>> masses, Boundary boundary) {
        const auto mass = masses.value_or(std::vector<double>(static_cast<std::size_t>(n), 1.0));
        return build_harmonic_chain(n, k, mass, boundary);
      },
      py::arg("n_atoms"), py::arg("spring_constant") = 1.0, py::arg("masses") = py::none(),
      py::arg("boundary") = Boundary::free);
  m.def("spring_network", &build_spring_network, py::arg("geometry"), py::arg("cutoff"),
        py::arg("spring_constant") = 1.0);

  py::class_<CGBasis>(m, "CGBasis")
      .def_property_readonly("phi", &CGBasis::phi)
      .def_property_readonly("dim", &CGBasis::dim)
      .def_property_readonly("size", &CGBasis::size)
      .def("apply_qv", &CGBasis::apply_qv)
      .def("apply_pv", &CGBasis::apply_pv);
  m.def("basis_from_matrix", [](const Matrix& columns) { return basis_from_matrix(columns); }, py::arg("columns"));
  m.def(
      "rtb_basis",
      [](const HessianModel& model, const std::vector<std::vector<Index>>& blocks, RtbMode mode) {
        return build_rtb_basis(model, partition_from(blocks), mode);
      },
      py::arg("model"), py::arg("blocks"), py::arg("mode") = RtbMode::three_d);
  m.def(
      "uniform_blocks",
      [](std::size_t n_atoms, std::size_t block_size) { return BlockPartition::uniform(n_atoms, block_size).blocks; },
      py::arg("n_atoms"), py::arg("block_size"));
  m.def("lowest_modes_basis", &lowest_modes_basis, py::arg("model"), py::arg("m"), py::arg("skip_null") = true,
        py::arg("null_threshold") = kDefaultNullThreshold);

  m.def("uniform_grid", &uniform_grid, py::arg("t_max"), py::arg("n_points"));

  py::class_<ComplementSpectrum>(m, "ComplementSpectrum")
      .def_readonly("lambdas", &ComplementSpectrum::lambdas)
      .def_readonly("coupling", &ComplementSpectrum::coupling)
      .def_readonly("dropped_modes", &ComplementSpectrum::dropped_modes)
      .def_readonly("null_cutoff", &ComplementSpectrum::null_cutoff);
  m.def(
      "compute_spectrum",
      [](const HessianModel& model, const CGBasis& basis, double thr) { return compute_spectrum(model, basis, thr); },
      py::arg("model"), py::arg("basis"), py::arg("null_threshold") = kDefaultNullThreshold);
  m.def(
      "theta_exact", [](const ComplementSpectrum& s, const std::vector<double>& t) { return stack(theta_exact(s, t)); },
      py::arg("spectrum"), py::arg("times"));
  m.def(
      "beta_exact", [](const ComplementSpectrum& s, const std::vector<double>& t) { return stack(beta_exact(s, t)); },
      py::arg("spectrum"), py::arg("times"));
  m.def("matrix_identity_residual", &matrix_identity_residual, py::arg("a"), py::arg("phi"));

  py::class_<BlockLanczosFactorization>(m, "BlockLanczosFactorization")
      .def_readonly("steps", &BlockLanczosFactorization::steps)
      .def_readonly("t", &BlockLanczosFactorization::t)
      .def_readonly("r0", &BlockLanczosFactorization::r0)
      .def_readonly("block_sizes", &BlockLanczosFactorization::block_sizes)
      .def_readonly("exhausted", &BlockLanczosFactorization::exhausted)
      .def_property_readonly("krylov_dim", &BlockLanczosFactorization::krylov_dim);
  m.def(
      "block_lanczos",
      [](const HessianModel& model, const CGBasis& basis, int order, double rank_tol, Reorthogonalization reorth) {
        LanczosOptions o;
        o.order = order;
        o.rank_tol = rank_tol;
        o.reorth = reorth;
        return block_lanczos(model.operator_A(), basis, o);
      },
      py::arg("model"), py::arg("basis"), py::arg("order") = 4, py::arg("rank_tol") = 1e-10,
      py::arg("reorth") = Reorthogonalization::full);

  py::class_<KrylovKernelEvaluator>(m, "KrylovKernelEvaluator")
      .def(py::init<BlockLanczosFactorization, double>(), py::arg("factorization"),
           py::arg("null_threshold") = kDefaultNullThreshold)
      .def_property_readonly("eigenvalues", &KrylovKernelEvaluator::eigenvalues)
      .def_property_readonly("size", &KrylovKernelEvaluator::size)
      .def_property_readonly("factorization", &KrylovKernelEvaluator::factorization);
  m.def(
      "theta_krylov",
      [](const KrylovKernelEvaluator& ev, const std::vector<double>& t) { return stack(theta_krylov(ev, t)); },
      py::arg("evaluator"), py::arg("times"));
  m.def(
      "beta_krylov",
      [](const KrylovKernelEvaluator& ev, const std::vector<double>& t) { return stack(beta_krylov(ev, t)); },
      py::arg("evaluator"), py::arg("times"));

  m.def(
      "sample_noise",
      [](const KrylovKernelEvaluator& ev, const std::vector<double>& times, Index samples, double kbt,
         std::uint64_t seed) {
        const auto ens = sample_trajectories(NoiseSampler(ev, kbt, seed), times, samples);
        py::array_t<double> out({static_cast<py::ssize_t>(ens.count()), static_cast<py::ssize_t>(times.size()),
                                 static_cast<py::ssize_t>(ens.size())});
        auto view = out.mutable_unchecked<3>();
        for (py::ssize_t s = 0; s < out.shape(0); ++s)
          for (py::ssize_t k = 0; k < out.shape(1); ++k)
            for (py::ssize_t i = 0; i < out.shape(2); ++i) view(s, k, i) = ens.samples[s](k, i);
        return out;
      },
      py::arg("evaluator"), py::arg("times"), py::arg("samples"), py::arg("kbt") = 1.0, py::arg("seed") = 0);
  m.def(
      "fdt_check",
      [](const KrylovKernelEvaluator& ev, const std::vector<double>& times, Index samples, double kbt,
         std::uint64_t seed, const std::vector<double>& lags) {
        const auto ens = sample_trajectories(NoiseSampler(ev, kbt, seed), times, samples);
        return py::module_::import("json").attr("loads")(
            to_json(fdt_check(ens, ev, kbt, lag_pairs(times, lags))).dump());
      },
      py::arg("evaluator"), py::arg("times"), py::arg("samples"), py::arg("kbt") = 1.0, py::arg("seed") = 0,
      py::arg("lags") = std::vector<double>{0.0});

  m.def(
      "run_command",
      [](const std::string& command, const std::filesystem::path& config_path, const std::filesystem::path& out,
         const std::string& method) {
        const auto config = RunConfig::load(config_path);
        CommandResult r;
        if (command == "kernel")
          r = cmd_kernel(config, parse_kernel_method(method), out);
        else if (command == "convergence")
          r = cmd_convergence(config, out);
        else if (command == "coarsen")
          r = cmd_coarsen(config, out);
        else if (command == "noise")
          r = cmd_noise(config, out);
        else if (command == "info")
          r = cmd_info(config, out);
        else
          throw Error(ErrorCode::config, "unknown command '" + command + "'");
        return r.exit_code;
      },
      py::arg("command"), py::arg("config"), py::arg("out"), py::arg("method") = "both");
}
