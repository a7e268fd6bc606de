#include <bfekf/bfekf.h>

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

namespace {

int exit_code(bfekf_status status) {
  switch (status) {
    case BFEKF_OK:
      return 0;
    case BFEKF_ERR_CONFIG:
    case BFEKF_ERR_INVALID_ARGUMENT:
      return 2;
    case BFEKF_ERR_NUMERICAL:
      return 3;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint state and dynamics learning with basis-function EKFs"};
  app.set_version_flag("--version", std::string(bfekf_version()));

  std::string experiment;
  std::string config;
  std::uint64_t seed = 1;
  int runs = 0;
  std::string out = "results";
  std::string method;
  std::string sweep;
  bool quiet = false;

  app.add_option("experiment", experiment, "example1, tire, intersection, bench-eval or bench-predict")->required();
  app.add_option("--config", config, "INI configuration file");
  app.add_option("--seed", seed, "master random seed");
  app.add_option("--runs", runs, "Monte Carlo runs (overrides the config)")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "root of the results directory");
  app.add_option("--method", method, "dense, csrbf, fast-csrbf, a comma list, or all");
  app.add_option("--nw-sweep", sweep, "comma-separated total weight counts for benchmarks");
  app.add_flag("--quiet", quiet, "do not print metrics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  bfekf_run_request req{};
  req.experiment = experiment.c_str();
  req.config_path = config.empty() ? nullptr : config.c_str();
  req.seed = seed;
  req.runs = runs;
  req.out_dir = out.c_str();
  req.methods = method.empty() ? nullptr : method.c_str();
  req.nw_sweep = sweep.empty() ? nullptr : sweep.c_str();
  req.write_outputs = 1;

  bfekf_report* report = nullptr;
  const bfekf_status status = bfekf_run_experiment(&req, &report);
  if (status != BFEKF_OK) {
    std::cerr << "bfekf: " << bfekf_status_name(status) << ": " << bfekf_last_error() << '\n';
    return exit_code(status);
  }
  if (!quiet) std::cout << bfekf_report_metrics_json(report) << '\n';
  std::cerr << "results written to " << bfekf_report_directory(report) << '\n';
  bfekf_report_free(report);
  return 0;
}
