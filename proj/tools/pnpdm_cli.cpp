// pnpdm: run, validate and re-score posterior sampling experiments.

#include "pnpdm/config.hpp"
#include "pnpdm/experiment.hpp"
#include "pnpdm/npy.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> chains;

  std::vector<std::string> all_overrides() const {
    std::vector<std::string> out = overrides;
    if (seed) out.push_back("sampler.seed=" + std::to_string(*seed));
    if (chains) out.push_back("sampler.chains=" + std::to_string(*chains));
    return out;
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "INI configuration file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Sampler seed (overrides sampler.seed)");
  cmd->add_option("--chains", c.chains, "Number of chains (overrides sampler.chains)");
  cmd->add_option("--override", c.overrides, "section.key=value, repeatable")->take_all();
}

void print_metrics(const pnpdm::MetricsReport& m) {
  std::cout << std::setprecision(6) << "samples           " << m.sample_count << "\n"
            << "psnr [dB]         " << m.psnr << "\n"
            << "outlier fraction  " << m.outlier_fraction << "\n";
  if (m.data_mismatch) std::cout << "data mismatch     " << *m.data_mismatch << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Plug-and-play posterior sampling with diffusion priors"};
  app.set_version_flag("--version", pnpdm::version());
  app.require_subcommand(1);

  Common run_opts;
  std::string out_dir = "runs";
  auto* run = app.add_subcommand("run", "Run an experiment and write its artifacts");
  add_common(run, run_opts);
  run->add_option("--out", out_dir, "Output directory");

  Common validate_opts;
  auto* validate = app.add_subcommand("validate", "Check a configuration without running it");
  add_common(validate, validate_opts);

  std::string run_dir;
  auto* metrics = app.add_subcommand("metrics", "Recompute metrics from a finished run directory");
  metrics->add_option("--out", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pnpdm::kExitConfig;
  }

  if (*run) {
    pnpdm::ExperimentConfig cfg;
    try {
      cfg = pnpdm::load_config(run_opts.config, run_opts.all_overrides());
      print_metrics(pnpdm::run_experiment(cfg, out_dir).metrics);
    } catch (const pnpdm::ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return pnpdm::kExitConfig;
    } catch (const std::exception& e) {
      std::cerr << "run aborted: " << e.what() << "\n";
      return pnpdm::kExitRuntime;
    }
    return pnpdm::kExitOk;
  }

  if (*validate) {
    try {
      const pnpdm::ExperimentConfig cfg = pnpdm::load_config(validate_opts.config, validate_opts.all_overrides());
      std::cout << "ok " << pnpdm::sha256_hex(pnpdm::canonical_config(cfg)) << "\n";
      return pnpdm::kExitOk;
    } catch (const pnpdm::ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return pnpdm::kExitConfig;
    }
  }

  try {
    print_metrics(pnpdm::recompute_metrics(run_dir));
  } catch (const pnpdm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return pnpdm::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "metrics failed: " << e.what() << "\n";
    return pnpdm::kExitRuntime;
  }
  return pnpdm::kExitOk;
}
