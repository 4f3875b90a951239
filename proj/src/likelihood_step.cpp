#include "pnpdm/likelihood_step.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace pnpdm {
namespace {

// Diagonal noise: whiten rows so the remaining noise is unit-variance.
std::shared_ptr<const LinearOperator> whitened_operator(const LinearGaussianLikelihood& lik) {
  if (lik.isotropic()) return lik.op_ptr();
  const auto* dense = dynamic_cast<const DenseOperator*>(&lik.op());
  if (!dense)
    throw std::invalid_argument("exact likelihood step: diagonal noise requires a dense operator; use LMC instead");
  Matrix weighted = lik.noise_std().cwiseInverse().asDiagonal() * dense->matrix();
  return std::make_shared<DenseOperator>(std::move(weighted));
}

}  // namespace

ConjugateGaussianSampler::ConjugateGaussianSampler(const LinearGaussianLikelihood& likelihood)
    : op_(whitened_operator(likelihood)) {
  if (!op_->has_spectral())
    throw std::invalid_argument("exact likelihood step: operator exposes no spectral structure; use LMC instead");
  if (likelihood.isotropic()) {
    noise_var_ = likelihood.noise_std()[0] * likelihood.noise_std()[0];
    data_term_ = op_->adjoint(likelihood.measurement()) / noise_var_;
  } else {
    noise_var_ = 1.0;
    data_term_ = op_->adjoint(likelihood.measurement().cwiseQuotient(likelihood.noise_std()));
  }
}

Vector ConjugateGaussianSampler::apply_covariance(const Vector& v, double rho) const {
  if (!(rho > 0.0)) throw std::invalid_argument("exact likelihood step: rho must be positive");
  const double prior_prec = 1.0 / (rho * rho);
  const double inv_var = 1.0 / noise_var_;
  return op_->apply_gram_function(v, [=](double mu) { return 1.0 / (mu * inv_var + prior_prec); });
}

Vector ConjugateGaussianSampler::mean(const Vector& x, double rho) const {
  if (x.size() != dim()) throw std::invalid_argument("exact likelihood step: dimension mismatch");
  return apply_covariance(data_term_ + x / (rho * rho), rho);
}

Vector ConjugateGaussianSampler::sample(const Vector& x, double rho, Rng& rng) const {
  const Vector eta = standard_normal(dim(), rng);
  const double prior_prec = 1.0 / (rho * rho);
  const double inv_var = 1.0 / noise_var_;
  return mean(x, rho) +
         op_->apply_gram_function(eta, [=](double mu) { return 1.0 / std::sqrt(mu * inv_var + prior_prec); });
}

Vector exact_gaussian_sample(const LinearGaussianLikelihood& likelihood, const Vector& x, double rho, Rng& rng) {
  return ConjugateGaussianSampler(likelihood).sample(x, rho, rng);
}

void LmcSpec::validate() const {
  if (!(step_size > 0.0)) throw std::invalid_argument("lmc: step size must be positive");
  if (iterations < 1) throw std::invalid_argument("lmc: iterations must be >= 1");
}

Vector lmc_sample(const LikelihoodPotential& f, const Vector& x, double rho, const LmcSpec& spec,
                  const NoiseSource& noise) {
  spec.validate();
  if (!(rho > 0.0)) throw std::invalid_argument("lmc: rho must be positive");
  if (x.size() != f.dim()) throw std::invalid_argument("lmc: dimension mismatch");
  const double gamma = spec.step_size;
  const double pull = gamma / (rho * rho);
  const double diffusion = std::sqrt(2.0 * gamma);
  Vector u = x;
  Vector eps(x.size());
  for (int j = 0; j < spec.iterations; ++j) {
    const Vector grad = f.gradient(u);
    if (!grad.allFinite())
      throw NumericalError("lmc: non-finite gradient at iteration " + std::to_string(j) +
                           " (step size too large or model ill-posed)");
    noise(eps);
    u = u - gamma * grad - pull * (u - x) + diffusion * eps;
  }
  if (!u.allFinite()) throw NumericalError("lmc: non-finite iterate");
  return u;
}

Vector lmc_sample(const LikelihoodPotential& f, const Vector& x, double rho, const LmcSpec& spec, Rng& rng) {
  std::normal_distribution<double> normal;
  return lmc_sample(f, x, rho, spec, [&](Vector& eps) {
    for (Index i = 0; i < eps.size(); ++i) eps[i] = normal(rng);
  });
}

LangevinLikelihoodStep::LangevinLikelihoodStep(std::shared_ptr<const LikelihoodPotential> potential, LmcSpec spec)
    : potential_(std::move(potential)), spec_(spec) {
  if (!potential_) throw std::invalid_argument("lmc: null potential");
  spec_.validate();
}

Vector LangevinLikelihoodStep::sample(const Vector& x, double rho, Rng& rng) const {
  return lmc_sample(*potential_, x, rho, spec_, rng);
}

LikelihoodMethod parse_likelihood_method(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (lower == "auto") return LikelihoodMethod::Auto;
  if (lower == "exact") return LikelihoodMethod::Exact;
  if (lower == "lmc") return LikelihoodMethod::Lmc;
  throw std::invalid_argument("unknown likelihood method '" + name + "' (expected auto, exact or lmc)");
}

bool supports_exact_step(const LikelihoodPotential& potential) {
  const auto* linear = dynamic_cast<const LinearGaussianLikelihood*>(&potential);
  if (!linear || !linear->op().has_spectral()) return false;
  return linear->isotropic() || dynamic_cast<const DenseOperator*>(&linear->op()) != nullptr;
}

std::shared_ptr<LikelihoodStep> make_likelihood_step(std::shared_ptr<const LikelihoodPotential> potential,
                                                     LikelihoodMethod method, const LmcSpec& lmc) {
  if (!potential) throw std::invalid_argument("likelihood step: null potential");
  const bool exact = method == LikelihoodMethod::Exact ||
                     (method == LikelihoodMethod::Auto && supports_exact_step(*potential));
  if (exact) {
    const auto* linear = dynamic_cast<const LinearGaussianLikelihood*>(potential.get());
    if (!linear) throw std::invalid_argument("likelihood step: exact sampling needs a linear-Gaussian model");
    return std::make_shared<ExactLikelihoodStep>(*linear);
  }
  return std::make_shared<LangevinLikelihoodStep>(std::move(potential), lmc);
}

}  // namespace pnpdm
