#pragma once

#include "pnpdm/config.hpp"
#include "pnpdm/forward_models.hpp"
#include "pnpdm/likelihood_step.hpp"
#include "pnpdm/metrics.hpp"
#include "pnpdm/prior_step.hpp"
#include "pnpdm/sampler.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace pnpdm {

/// Everything a configuration expands into. Built deterministically from
/// problem.seed: the operator or mask is drawn first, then the truth, then the
/// measurement noise.
struct Problem {
  Shape2 shape;
  Vector truth;
  Vector measurement;
  std::shared_ptr<const LikelihoodPotential> likelihood;
  std::shared_ptr<const LikelihoodStep> likelihood_step;
  std::shared_ptr<const PriorStep> prior_step;
  std::optional<Vector> mask_phases;  // CDP
  std::optional<Matrix> kernel;       // convolution
  std::optional<Matrix> operator_matrix;  // dense operators
};

// The squared-exponential prior adds this multiple of the variance to the diagonal.
inline constexpr double kCovarianceJitter = 1e-6;

Problem build_problem(const ExperimentConfig& cfg);

struct RunResult {
  std::vector<ChainRecord> chains;
  MetricsReport metrics;
  std::filesystem::path manifest_path;
};

/// Runs every chain and writes into out_dir:
///   config.ini, manifest.json, metrics.json, samples_chain<i>.npy, rho_trace.npy,
///   truth.npy, measurement.npy, mean.npy, std.npy, zscore.npy and, depending on
///   the problem, mask_phases.npy, kernel.npy or operator.npy.
RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Loads a config, applies overrides and runs it. Returns 0 on success, 2 for a
/// configuration error and 3 when a run aborts; diagnostics go to `err`.
int run_experiment(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
                   const std::vector<std::string>& overrides, std::ostream& err);

/// Recomputes metrics.json (and mean/std/zscore arrays) from the arrays of a
/// finished run directory.
MetricsReport recompute_metrics(const std::filesystem::path& run_dir);

// Exit codes shared by the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

std::string version();

}  // namespace pnpdm
