#pragma once

#include "mzkernel/basis.hpp"
#include "mzkernel/krylov_kernel.hpp"
#include "mzkernel/model.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mzkernel {

struct ModelConfig {
  std::string kind = "demo";  // demo | chain | network | lattice_network | file
  Index n_atoms = 2;
  double spring_constant = 1.0;
  std::vector<double> masses;  // empty: unit masses
  std::string boundary = "free";
  std::vector<std::vector<double>> positions;
  double cutoff = 1.5;
  std::uint64_t seed = 1;
  double spacing = 1.0;
  double jitter = 0.15;
  double mass_min = 1.0;
  double mass_max = 1.0;
  std::string path;
  std::string format = "dense-csv";
  std::string sidecar;
};

struct BasisConfig {
  std::string kind = "matrix";  // rtb | file | lowest_modes | matrix | random
  std::string partition;        // rtb: partition file
  std::vector<std::vector<Index>> blocks;
  Index block_size = 0;
  std::string mode = "auto";  // rtb: 1d | 3d | auto
  std::string path;
  Index m = 1;
  bool skip_null = true;
  std::uint64_t seed = 7;
  std::vector<std::vector<double>> columns;
};

struct RunConfig {
  ModelConfig model;
  BasisConfig basis;
  double t_max = 0.1;
  Index n_points = 201;
  int order = 4;
  double rank_tol = 1e-10;
  std::string reorth = "full";
  double kbt = 1.0;
  Index samples = 20000;
  std::uint64_t seed = 42;
  std::vector<double> lags = {0.0, 0.025, 0.05, 0.1};
  std::vector<int> orders = {2, 4, 6};
  std::vector<std::string> partitions;
  std::vector<Index> block_sizes;
  double null_threshold = 1e-10;
  double orthonormality_tol = 1e-10;
  std::string units = "reduced";
  std::string output_dir = "out";

  /// Relative paths inside the document are resolved against `base_dir`.
  static RunConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);

  /// Every field, defaults included.
  nlohmann::json to_json() const;

  /// Throws config errors for out-of-range settings.
  void validate() const;

  std::vector<double> grid() const;
  LanczosOptions lanczos_options() const;
};

HessianModel build_model(const ModelConfig& config, const std::string& units);
CGBasis build_basis(const BasisConfig& config, const HessianModel& model);

}  // namespace mzkernel
