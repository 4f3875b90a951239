#include "pnpdm/schedules.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pnpdm {

void CouplingSchedule::validate() const {
  if (!(rho0 > 0.0) || !(rho_min > 0.0)) throw std::invalid_argument("coupling: rho0 and rho_min must be positive");
  if (rho_min > rho0) throw std::invalid_argument("coupling: rho_min must not exceed rho0");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("coupling: alpha must lie in (0, 1]");
}

double CouplingSchedule::rho(std::int64_t k) const {
  if (k < 0) throw std::invalid_argument("coupling: iteration index must be non-negative");
  // alpha^k underflows to 0 for large k, which the floor absorbs.
  return std::max(std::pow(alpha, static_cast<double>(k)) * rho0, rho_min);
}

double coupling_rho(const CouplingSchedule& schedule, std::int64_t k) { return schedule.rho(k); }

double sigma_vp(double t, double beta_d, double beta_min) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("sigma_vp: t must lie in [0, 1]");
  return std::sqrt(std::expm1(0.5 * beta_d * t * t + beta_min * t));
}

double sigma_vp_inverse(double sigma, double beta_d, double beta_min) {
  if (!(sigma >= 0.0)) throw std::domain_error("sigma_vp_inverse: sigma must be non-negative");
  // Root of beta_d/2 t^2 + beta_min t - c = 0, written to avoid cancellation at small c.
  const double c = std::log1p(sigma * sigma);
  return 2.0 * c / (beta_min + std::sqrt(beta_min * beta_min + 2.0 * beta_d * c));
}

std::string to_string(ScheduleFamily family) {
  switch (family) {
    case ScheduleFamily::EDM: return "EDM";
    case ScheduleFamily::VE: return "VE";
    case ScheduleFamily::VP: return "VP";
  }
  return "?";
}

ScheduleFamily parse_schedule_family(const std::string& name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char ch) { return std::toupper(ch); });
  if (upper == "EDM") return ScheduleFamily::EDM;
  if (upper == "VE") return ScheduleFamily::VE;
  if (upper == "VP") return ScheduleFamily::VP;
  throw std::invalid_argument("unknown schedule family '" + name + "' (expected EDM, VE or VP)");
}

DiffusionSchedule::DiffusionSchedule(const DiffusionScheduleParams& params) : params_(params) {
  if (params_.steps < 2) throw std::invalid_argument("schedule: at least 2 steps required");
  if (!(params_.sigma_min > 0.0) || !(params_.sigma_max > params_.sigma_min))
    throw std::invalid_argument("schedule: require 0 < sigma_min < sigma_max");
  if (!(params_.grid_exponent > 0.0)) throw std::invalid_argument("schedule: grid exponent must be positive");
  if (params_.family == ScheduleFamily::VP) {
    if (!(params_.beta_d > 0.0) || !(params_.beta_min > 0.0))
      throw std::invalid_argument("schedule: VP betas must be positive");
    if (params_.sigma_max > sigma_vp(1.0, params_.beta_d, params_.beta_min))
      throw std::domain_error("schedule: sigma_max exceeds the VP range sigma_VP(1)");
  }

  const std::size_t n = params_.steps;
  const double inv_p = 1.0 / params_.grid_exponent;
  const double hi = std::pow(params_.sigma_max, inv_p);
  const double lo = std::pow(params_.sigma_min, inv_p);
  times_.resize(n + 1);
  sigmas_.resize(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(n - 1);
    const double level = std::pow(hi + frac * (lo - hi), params_.grid_exponent);
    times_[i] = sigma_inverse(level);
    sigmas_[i] = sigma(times_[i]);
  }
  times_[n] = 0.0;
  sigmas_[n] = 0.0;
}

double DiffusionSchedule::max_time() const {
  return params_.family == ScheduleFamily::VP ? 1.0 : std::numeric_limits<double>::infinity();
}

void DiffusionSchedule::check_time(double t) const {
  if (!(t >= 0.0 && t <= max_time()))
    throw std::domain_error("schedule: time " + std::to_string(t) + " outside the valid range of " +
                            to_string(params_.family));
}

double DiffusionSchedule::sigma(double t) const {
  check_time(t);
  switch (params_.family) {
    case ScheduleFamily::EDM: return t;
    case ScheduleFamily::VE: return std::sqrt(t);
    case ScheduleFamily::VP: return sigma_vp(t, params_.beta_d, params_.beta_min);
  }
  return 0.0;
}

double DiffusionSchedule::scale(double t) const {
  check_time(t);
  if (params_.family != ScheduleFamily::VP) return 1.0;
  const double q = 0.5 * params_.beta_d * t * t + params_.beta_min * t;
  return std::exp(-0.5 * q);
}

double DiffusionSchedule::sigma_inverse(double sigma) const {
  if (!(sigma >= 0.0)) throw std::domain_error("schedule: sigma must be non-negative");
  switch (params_.family) {
    case ScheduleFamily::EDM: return sigma;
    case ScheduleFamily::VE: return sigma * sigma;
    case ScheduleFamily::VP: {
      const double t = sigma_vp_inverse(sigma, params_.beta_d, params_.beta_min);
      if (t > 1.0) throw std::domain_error("schedule: sigma exceeds the VP range sigma_VP(1)");
      return t;
    }
  }
  return 0.0;
}

ScheduleValues DiffusionSchedule::eval(double t) const {
  check_time(t);
  ScheduleValues out;
  switch (params_.family) {
    case ScheduleFamily::EDM:
      out = {1.0, t, 0.0, 1.0};
      break;
    case ScheduleFamily::VE:
      if (t == 0.0) throw std::domain_error("schedule: VE derivative diverges at t = 0");
      out.scale = 1.0;
      out.sigma = std::sqrt(t);
      out.dscale = 0.0;
      out.dsigma = 0.5 / out.sigma;
      break;
    case ScheduleFamily::VP: {
      if (t == 0.0) throw std::domain_error("schedule: VP derivative diverges at t = 0");
      const double q = 0.5 * params_.beta_d * t * t + params_.beta_min * t;
      const double dq = params_.beta_d * t + params_.beta_min;
      out.sigma = std::sqrt(std::expm1(q));
      out.scale = std::exp(-0.5 * q);
      out.dsigma = std::exp(q) * dq / (2.0 * out.sigma);
      out.dscale = -0.5 * dq * out.scale;
      break;
    }
  }
  return out;
}

std::size_t DiffusionSchedule::start_index(double rho) const { return pnpdm::start_index(sigmas_, rho); }

ScheduleValues schedule_eval(const DiffusionSchedule& schedule, double t) { return schedule.eval(t); }

std::size_t start_index(std::span<const double> grid_sigmas, double rho) {
  if (grid_sigmas.empty()) throw std::invalid_argument("start_index: empty grid");
  if (!(rho > 0.0)) throw std::invalid_argument("start_index: rho must be positive");
  // Levels are decreasing, so the first level at or below rho is a partition point.
  auto it = std::partition_point(grid_sigmas.begin(), grid_sigmas.end(), [rho](double s) { return s > rho; });
  return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - grid_sigmas.begin(),
                                                           static_cast<std::ptrdiff_t>(grid_sigmas.size()) - 1));
}

}  // namespace pnpdm
