#pragma once

#include "pnpdm/likelihood_step.hpp"
#include "pnpdm/sampler.hpp"
#include "pnpdm/schedules.hpp"
#include "pnpdm/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pnpdm {

enum class ProblemKind { Linear, Cdp, Fpr };
enum class OperatorKind { Identity, DenseGaussian, Dense, Convolution, BlockAverage };
enum class PriorKind { Gaussian, Gmm };
enum class CovarianceKind { Isotropic, SquaredExponential, File };
enum class PriorSolver { Sde, Ode, ExactGaussian };

struct ProblemConfig {
  ProblemKind kind = ProblemKind::Linear;
  OperatorKind op = OperatorKind::DenseGaussian;
  Index rows = 1;
  Index cols = 1;
  Index measurements = 0;  // dense_gaussian only; 0 means half the pixel count
  Index kernel_size = 5;
  double kernel_std = 1.0;
  Index factor = 2;
  Index pad_factor = 2;
  double noise_std = 0.01;
  std::uint64_t seed = 0;  // draws the operator, mask, truth and noise
  // Inline values; a single value is broadcast. Files take precedence.
  std::vector<double> truth;
  std::vector<double> measurement;
  std::filesystem::path truth_file;
  std::filesystem::path measurement_file;
  std::filesystem::path operator_file;
  std::filesystem::path mask_file;  // CDP phases in radians

  Shape2 shape() const { return {rows, cols}; }
};

struct PriorConfig {
  PriorKind kind = PriorKind::Gaussian;
  CovarianceKind covariance = CovarianceKind::Isotropic;
  double mean = 0.0;
  double variance = 1.0;
  double length_scale = 1.0;  // in pixels, along the flattened index
  std::filesystem::path mean_file;
  std::filesystem::path covariance_file;
  // Mixture components, each isotropic with a constant mean.
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;
  PriorSolver solver = PriorSolver::Sde;
  double snap_ratio = 0.9;
};

struct ExperimentConfig {
  ProblemConfig problem;
  PriorConfig prior;
  DiffusionScheduleParams schedule;
  LikelihoodMethod likelihood = LikelihoodMethod::Auto;
  LmcSpec lmc;
  SamplerConfig sampler;
  double peak = 1.0;  // PSNR data range
  bool save_iterates = false;
  std::filesystem::path base_dir;  // relative paths resolve against this
};

std::string to_string(ProblemKind kind);
std::string to_string(OperatorKind kind);
std::string to_string(PriorKind kind);
std::string to_string(CovarianceKind kind);
std::string to_string(PriorSolver solver);

/// Parses the INI text. Sections: problem, prior, schedule, coupling,
/// likelihood, sampler, io. Unknown sections or keys, bad values and
/// inconsistent combinations raise ConfigError naming the "section.key".
/// Overrides are "section.key=value" strings applied before validation.
ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {},
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Canonical INI rendering of every field, with absolute paths. Parsing it back
/// yields the same configuration.
std::string canonical_config(const ExperimentConfig& cfg);

// Hex SHA-256 of arbitrary text.
std::string sha256_hex(const std::string& text);

}  // namespace pnpdm
