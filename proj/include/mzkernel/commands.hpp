#pragma once

#include "mzkernel/config.hpp"
#include "mzkernel/error.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mzkernel {

enum class KernelMethod { exact, krylov, both };

KernelMethod parse_kernel_method(std::string_view name);

struct CommandResult {
  int exit_code = 0;
  std::vector<std::filesystem::path> files;  // relative to the output directory
  std::string summary;
};

// Exit statuses of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitPolicy = 2;
inline constexpr int kExitCheck = 3;

int exit_code_for(ErrorCode code);

/// theta/beta CSVs and metadata for the chosen method; `both` adds a comparison.
CommandResult cmd_kernel(const RunConfig& config, KernelMethod method, const std::filesystem::path& out);

/// Error table against the dense oracle for every order in config.orders.
CommandResult cmd_convergence(const RunConfig& config, const std::filesystem::path& out);

/// theta(0) maxima and trace curves for each RTB partition; partitions that
/// span the whole space are listed as rejected.
CommandResult cmd_coarsen(const RunConfig& config, const std::filesystem::path& out);

/// Noise ensemble and FDT report; exit status 3 unless the check passes.
CommandResult cmd_noise(const RunConfig& config, const std::filesystem::path& out);

CommandResult cmd_info(const RunConfig& config, const std::filesystem::path& out);

}  // namespace mzkernel
