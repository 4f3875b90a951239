#pragma once

#include "pnpdm/forward_models.hpp"
#include "pnpdm/types.hpp"

#include <functional>
#include <memory>
#include <string>

namespace pnpdm {

/// Exact draws from pi(z | x) = N(m(x), Lambda^-1) for a linear model with
/// Gaussian noise, where Lambda = A^T Sigma^-1 A + rho^-2 I and
/// m(x) = Lambda^-1 (A^T Sigma^-1 y + rho^-2 x).
///
/// Uses the symmetric square root L = V (S^2/sigma^2 + rho^-2)^(-1/2) V^T, which
/// needs only the operator's Gram spectrum. Diagonal noise is absorbed into a
/// row-weighted dense operator; other operators require isotropic noise.
class ConjugateGaussianSampler {
 public:
  explicit ConjugateGaussianSampler(const LinearGaussianLikelihood& likelihood);

  Vector mean(const Vector& x, double rho) const;
  Vector sample(const Vector& x, double rho, Rng& rng) const;
  // Lambda^-1 v.
  Vector apply_covariance(const Vector& v, double rho) const;

  Index dim() const { return op_->input_size(); }

 private:
  std::shared_ptr<const LinearOperator> op_;
  double noise_var_ = 1.0;
  Vector data_term_;  // A^T Sigma^-1 y
};

Vector exact_gaussian_sample(const LinearGaussianLikelihood& likelihood, const Vector& x, double rho, Rng& rng);

struct LmcSpec {
  double step_size = 1e-3;
  int iterations = 100;

  void validate() const;
};

// Fills its argument with the innovation for one Langevin step.
using NoiseSource = std::function<void(Vector&)>;

/// Unadjusted Langevin on f(u; y) + ||u - x||^2 / (2 rho^2), started at u_0 = x:
///   u_{j+1} = u_j - gamma grad f(u_j) - (gamma / rho^2)(u_j - x) + sqrt(2 gamma) eps_j.
Vector lmc_sample(const LikelihoodPotential& f, const Vector& x, double rho, const LmcSpec& spec, Rng& rng);
Vector lmc_sample(const LikelihoodPotential& f, const Vector& x, double rho, const LmcSpec& spec,
                  const NoiseSource& noise);

/// One way of drawing z^(k) ~ pi(z | x^(k)).
class LikelihoodStep {
 public:
  virtual ~LikelihoodStep() = default;
  virtual Index dim() const = 0;
  virtual Vector sample(const Vector& x, double rho, Rng& rng) const = 0;
  virtual std::string name() const = 0;
};

class ExactLikelihoodStep final : public LikelihoodStep {
 public:
  explicit ExactLikelihoodStep(const LinearGaussianLikelihood& likelihood) : sampler_(likelihood) {}
  Index dim() const override { return sampler_.dim(); }
  Vector sample(const Vector& x, double rho, Rng& rng) const override { return sampler_.sample(x, rho, rng); }
  std::string name() const override { return "exact"; }
  const ConjugateGaussianSampler& sampler() const { return sampler_; }

 private:
  ConjugateGaussianSampler sampler_;
};

class LangevinLikelihoodStep final : public LikelihoodStep {
 public:
  LangevinLikelihoodStep(std::shared_ptr<const LikelihoodPotential> potential, LmcSpec spec);
  Index dim() const override { return potential_->dim(); }
  Vector sample(const Vector& x, double rho, Rng& rng) const override;
  std::string name() const override { return "lmc"; }

 private:
  std::shared_ptr<const LikelihoodPotential> potential_;
  LmcSpec spec_;
};

enum class LikelihoodMethod { Auto, Exact, Lmc };

LikelihoodMethod parse_likelihood_method(const std::string& name);

// True when the exact conjugate sampler applies to this potential.
bool supports_exact_step(const LikelihoodPotential& potential);

/// Exact when the model is linear-Gaussian with spectral structure, LMC otherwise
/// (unless forced).
std::shared_ptr<LikelihoodStep> make_likelihood_step(std::shared_ptr<const LikelihoodPotential> potential,
                                                     LikelihoodMethod method, const LmcSpec& lmc);

}  // namespace pnpdm
