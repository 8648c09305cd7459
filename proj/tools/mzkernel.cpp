#include "mzkernel/commands.hpp"
#include "mzkernel/parallel.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace mzkernel;

int main(int argc, char** argv) {
  CLI::App app{"Memory kernels and FDT noise for coarse-grained harmonic models"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string method = "both";
  unsigned threads = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory (overrides output_dir)");
    sub->add_option("--threads", threads, "Worker thread cap, 0 = hardware");
  };

  auto* kernel = app.add_subcommand("kernel", "Exact and/or Krylov kernels theta(t), beta(t)");
  add_common(kernel);
  kernel->add_option("--method", method, "exact | krylov | both")->check(CLI::IsMember({"exact", "krylov", "both"}));
  auto* convergence = app.add_subcommand("convergence", "Error against the exact kernel for several orders");
  add_common(convergence);
  auto* coarsen = app.add_subcommand("coarsen", "theta(0) across RTB partitions");
  add_common(coarsen);
  auto* noise = app.add_subcommand("noise", "Sample FDT noise and check its covariance");
  add_common(noise);
  auto* info = app.add_subcommand("info", "Describe the configured model and basis");
  add_common(info);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    set_max_threads(threads);
    const RunConfig config = RunConfig::load(config_path);
    const std::filesystem::path out = out_dir.empty() ? std::filesystem::path(config.output_dir) : std::filesystem::path(out_dir);

    CommandResult result;
    if (kernel->parsed())
      result = cmd_kernel(config, parse_kernel_method(method), out);
    else if (convergence->parsed())
      result = cmd_convergence(config, out);
    else if (coarsen->parsed())
      result = cmd_coarsen(config, out);
    else if (noise->parsed())
      result = cmd_noise(config, out);
    else
      result = cmd_info(config, out);

    std::cout << result.summary << "\n";
    for (const auto& f : result.files) std::cout << "  " << (out / f).string() << "\n";
    return result.exit_code;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
