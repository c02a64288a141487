// Command-line front end: estimate / sweep / logistic / diagnose.

#include <iostream>

#include <CLI11.hpp>

#include "anneal/config.hpp"
#include "anneal/experiments.hpp"
#include "anneal/kernels.hpp"
#include "anneal/sde.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string data_path;
  anneal::CliOverrides overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_data) {
  if (with_data)
    cmd->add_option("data", args.data_path, "logistic data CSV")->required();
  cmd->add_option("config", args.config_path, "run configuration file")->required();
  cmd->add_option("--seed", [&args](const std::vector<std::string>& v) {
        args.overrides.seed = std::stoull(v.front());
        return true;
      },
      "override the base seed");
  cmd->add_option("--workers", [&args](const std::vector<std::string>& v) {
        args.overrides.workers = std::stoi(v.front());
        return true;
      },
      "worker thread count");
  cmd->add_option("--out", [&args](const std::vector<std::string>& v) {
        args.overrides.out = v.front();
        return true;
      },
      "output CSV path");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"annealed Langevin estimators for normalizing constants"};
  app.require_subcommand(1);

  CommonArgs est_args, sweep_args, logi_args, diag_args;
  std::string kernel_backend = "auto";
  app.add_option("--kernel", kernel_backend, "kernel backend: auto|scalar|avx2");

  CLI::App* est = app.add_subcommand("estimate", "run one estimation cell");
  add_common(est, est_args, false);
  CLI::App* sweep = app.add_subcommand("sweep", "run a dimension/epsilon/h sweep");
  add_common(sweep, sweep_args, false);
  CLI::App* logi = app.add_subcommand("logistic", "logistic marginal-likelihood pipeline");
  add_common(logi, logi_args, true);
  CLI::App* diag = app.add_subcommand("diagnose", "run the verification suite");
  add_common(diag, diag_args, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (kernel_backend == "scalar")
      anneal::kernels::select_backend(anneal::kernels::Backend::scalar);
    else if (kernel_backend == "avx2")
      anneal::kernels::select_backend(anneal::kernels::Backend::avx2);
    else if (kernel_backend != "auto")
      throw anneal::ConfigError("unknown kernel backend: " + kernel_backend);

    if (est->parsed()) {
      const auto cfg = anneal::Config::parse_file(est_args.config_path);
      return anneal::run_estimate(cfg, est_args.overrides, std::cout);
    }
    if (sweep->parsed()) {
      const auto cfg = anneal::Config::parse_file(sweep_args.config_path);
      return anneal::run_sweep(cfg, sweep_args.overrides, std::cout);
    }
    if (logi->parsed()) {
      const auto cfg = anneal::Config::parse_file(logi_args.config_path);
      return anneal::run_logistic(logi_args.data_path, cfg, logi_args.overrides, std::cout);
    }
    if (diag->parsed()) {
      const auto cfg = anneal::Config::parse_file(diag_args.config_path);
      return anneal::run_diagnostics(cfg, diag_args.overrides, std::cout);
    }
  } catch (const anneal::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return anneal::kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return anneal::kExitConfig;
  } catch (const anneal::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return anneal::kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return anneal::kExitConfig;
  }
  return anneal::kExitOk;
}
