#pragma once

#include "pnpdm/denoisers.hpp"
#include "pnpdm/schedules.hpp"
#include "pnpdm/types.hpp"

#include <cstddef>
#include <memory>
#include <string>

namespace pnpdm {

enum class DiffusionSolver { SDE, ODE };

std::string to_string(DiffusionSolver solver);
DiffusionSolver parse_diffusion_solver(const std::string& name);

struct PriorStepConfig {
  DiffusionSchedule schedule;
  DiffusionSolver solver = DiffusionSolver::SDE;
  std::shared_ptr<const Denoiser> denoiser;
  // When the first on-grid level falls below snap_ratio * rho, an extra Euler
  // step from the exact t* (sigma(t*) = rho) down to that level is inserted.
  double snap_ratio = 0.9;

  void validate() const;
};

/// What happened during one prior step.
struct PriorStepStats {
  std::size_t start_index = 0;
  std::size_t denoiser_calls = 0;
  bool exact_start = false;  // started from sigma(t*) = rho off-grid
  bool clamped = false;      // rho above the grid, started at t_0
  bool identity = false;     // rho below every positive grid level
};

/// Samples pi(x | z) ∝ exp(-g(x) - ||x - z||^2 / (2 rho^2)) by integrating the
/// reverse diffusion from noise level rho to 0 with explicit Euler steps:
///   d_i = (lambda sigma'/sigma + s'/s) v_i - (lambda sigma' s / sigma) D(v_i / s; sigma),
///   v_{i+1} = v_i + (t_{i+1} - t_i) d_i [+ s sqrt(2 sigma' sigma (t_i - t_{i+1})) eps_i],
/// with lambda = 2 (SDE) or 1 (probability-flow ODE). Coefficients are taken at
/// the left endpoint t_i; the final step carries no noise.
Vector prior_sample(const PriorStepConfig& cfg, const Vector& z, double rho, Rng& rng,
                    PriorStepStats* stats = nullptr);

/// One way of drawing x^(k+1) ~ pi(x | z^(k)).
class PriorStep {
 public:
  virtual ~PriorStep() = default;
  virtual Index dim() const = 0;
  virtual Vector sample(const Vector& z, double rho, Rng& rng, PriorStepStats* stats) const = 0;
  virtual std::string name() const = 0;
};

class DiffusionPriorStep final : public PriorStep {
 public:
  explicit DiffusionPriorStep(PriorStepConfig cfg);
  Index dim() const override { return cfg_.denoiser->dim(); }
  Vector sample(const Vector& z, double rho, Rng& rng, PriorStepStats* stats) const override {
    return prior_sample(cfg_, z, rho, rng, stats);
  }
  std::string name() const override { return "diffusion-" + to_string(cfg_.solver); }
  const PriorStepConfig& config() const { return cfg_; }

 private:
  PriorStepConfig cfg_;
};

/// Closed-form Gaussian denoising posterior
///   x | z ~ N(mu + Sigma (Sigma + rho^2 I)^-1 (z - mu), Sigma - Sigma (Sigma + rho^2 I)^-1 Sigma).
/// Reference prior step for validating the outer loop independently of the
/// diffusion integrator.
class ExactGaussianPriorStep final : public PriorStep {
 public:
  explicit ExactGaussianPriorStep(GaussianPrior prior) : prior_(std::move(prior)) {}
  Index dim() const override { return prior_.dim(); }
  Vector sample(const Vector& z, double rho, Rng& rng, PriorStepStats* stats) const override;
  std::string name() const override { return "exact-gaussian"; }

 private:
  GaussianPrior prior_;
};

}  // namespace pnpdm
