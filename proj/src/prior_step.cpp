#include "pnpdm/prior_step.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace pnpdm {

std::string to_string(DiffusionSolver solver) { return solver == DiffusionSolver::SDE ? "sde" : "ode"; }

DiffusionSolver parse_diffusion_solver(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (lower == "sde") return DiffusionSolver::SDE;
  if (lower == "ode" || lower == "pf-ode") return DiffusionSolver::ODE;
  throw std::invalid_argument("unknown solver '" + name + "' (expected sde or ode)");
}

void PriorStepConfig::validate() const {
  if (!denoiser) throw std::invalid_argument("prior step: no denoiser");
  if (!(snap_ratio >= 0.0 && snap_ratio <= 1.0)) throw std::invalid_argument("prior step: snap ratio must lie in [0, 1]");
}

Vector prior_sample(const PriorStepConfig& cfg, const Vector& z, double rho, Rng& rng, PriorStepStats* stats) {
  cfg.validate();
  if (!(rho > 0.0)) throw std::invalid_argument("prior step: rho must be positive");
  if (z.size() != cfg.denoiser->dim()) throw std::invalid_argument("prior step: dimension mismatch");

  PriorStepStats local;
  PriorStepStats& st = stats ? *stats : local;
  st = PriorStepStats{};

  const DiffusionSchedule& sched = cfg.schedule;
  const auto times = sched.times();
  const auto sigmas = sched.sigmas();
  const std::size_t n_steps = sched.steps();
  const std::size_t first = sched.start_index(rho);
  st.start_index = first;
  if (first == n_steps) {
    st.identity = true;
    return z;
  }

  const bool sde = cfg.solver == DiffusionSolver::SDE;
  const double lambda = sde ? 2.0 : 1.0;
  const Denoiser& denoiser = *cfg.denoiser;
  std::normal_distribution<double> normal;

  auto euler = [&](double t_cur, double t_next, Vector& v, bool add_noise) {
    const ScheduleValues c = sched.eval(t_cur);
    const Vector denoised = denoiser.denoise(v / c.scale, c.sigma);
    ++st.denoiser_calls;
    const double coef_v = lambda * c.dsigma / c.sigma + c.dscale / c.scale;
    const double coef_d = lambda * c.dsigma * c.scale / c.sigma;
    v += (t_next - t_cur) * (coef_v * v - coef_d * denoised);
    if (add_noise) {
      const double amp = c.scale * std::sqrt(2.0 * c.dsigma * c.sigma * (t_cur - t_next));
      for (Index k = 0; k < v.size(); ++k) v[k] += amp * normal(rng);
    }
  };

  Vector v;
  if (first == 0 && rho > sigmas[0]) {
    st.clamped = true;
    v = sched.scale(times[0]) * z;
  } else if (first >= 1 && sigmas[first] < cfg.snap_ratio * rho) {
    const double t_star = sched.sigma_inverse(rho);
    st.exact_start = true;
    v = sched.scale(t_star) * z;
    euler(t_star, times[first], v, sde);
  } else {
    v = sched.scale(times[first]) * z;
  }

  for (std::size_t i = first; i < n_steps; ++i) euler(times[i], times[i + 1], v, sde && i != n_steps - 1);

  if (!v.allFinite()) throw NumericalError("prior step: non-finite iterate");
  return v;
}

DiffusionPriorStep::DiffusionPriorStep(PriorStepConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

Vector ExactGaussianPriorStep::sample(const Vector& z, double rho, Rng& rng, PriorStepStats* stats) const {
  if (!(rho > 0.0)) throw std::invalid_argument("prior step: rho must be positive");
  if (stats) *stats = PriorStepStats{};
  const double r2 = rho * rho;
  const Vector mean = prior_.denoise(z, rho);
  const Vector eta = standard_normal(prior_.dim(), rng);
  // Posterior eigenvalues lambda rho^2 / (lambda + rho^2).
  return mean + prior_.apply_spectral(eta, [r2](double lam) { return std::sqrt(lam * r2 / (lam + r2)); });
}

}  // namespace pnpdm
