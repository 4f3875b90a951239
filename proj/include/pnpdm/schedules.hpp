#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pnpdm {

/// Exponential annealing of the coupling strength, clamped at a floor:
/// rho_k = max(alpha^k * rho0, rho_min).
struct CouplingSchedule {
  double rho0 = 10.0;
  double rho_min = 0.3;
  double alpha = 0.9;

  void validate() const;
  double rho(std::int64_t k) const;
};

double coupling_rho(const CouplingSchedule& schedule, std::int64_t k);

inline constexpr double kVpBetaD = 19.9;
inline constexpr double kVpBetaMin = 0.1;

// sigma_VP(t) = sqrt(exp(beta_d t^2 / 2 + beta_min t) - 1) for t in [0, 1].
double sigma_vp(double t, double beta_d = kVpBetaD, double beta_min = kVpBetaMin);
// Closed-form inverse via the quadratic in t.
double sigma_vp_inverse(double sigma, double beta_d = kVpBetaD, double beta_min = kVpBetaMin);

enum class ScheduleFamily { EDM, VE, VP };

std::string to_string(ScheduleFamily family);
ScheduleFamily parse_schedule_family(const std::string& name);

/// Scale s(t), noise level sigma(t) and their time derivatives.
struct ScheduleValues {
  double scale = 1.0;
  double sigma = 0.0;
  double dscale = 0.0;
  double dsigma = 0.0;
};

struct DiffusionScheduleParams {
  ScheduleFamily family = ScheduleFamily::EDM;
  double sigma_min = 0.002;
  double sigma_max = 80.0;
  // Number of steps N; the grid has N + 1 times with t_N = 0.
  std::size_t steps = 100;
  // Exponent of the polynomial noise-level spacing.
  double grid_exponent = 7.0;
  double beta_d = kVpBetaD;
  double beta_min = kVpBetaMin;
};

/// One diffusion family (EDM, VE or VP) together with its discretization grid.
///
/// Grid noise levels follow
///   sigma_i = (sigma_max^(1/p) + i/(N-1) (sigma_min^(1/p) - sigma_max^(1/p)))^p,  i < N,
/// mapped to times through the family's sigma^-1, and t_N = 0 is appended.
class DiffusionSchedule {
 public:
  DiffusionSchedule() : DiffusionSchedule(DiffusionScheduleParams{}) {}
  explicit DiffusionSchedule(const DiffusionScheduleParams& params);

  const DiffusionScheduleParams& params() const { return params_; }
  ScheduleFamily family() const { return params_.family; }

  double sigma(double t) const;
  double scale(double t) const;
  double sigma_inverse(double sigma) const;

  // Full evaluation including derivatives. VE and VP derivatives diverge at
  // t = 0, so those families throw std::domain_error there.
  ScheduleValues eval(double t) const;

  // Largest valid time for the family (1 for VP, unbounded otherwise).
  double max_time() const;

  std::span<const double> times() const { return times_; }
  std::span<const double> sigmas() const { return sigmas_; }
  std::size_t steps() const { return times_.size() - 1; }

  std::size_t start_index(double rho) const;

 private:
  void check_time(double t) const;

  DiffusionScheduleParams params_;
  std::vector<double> times_;
  std::vector<double> sigmas_;
};

ScheduleValues schedule_eval(const DiffusionSchedule& schedule, double t);

/// Smallest i with grid_sigmas[i] <= rho. Returns grid_sigmas.size() - 1 (the
/// terminal index) when rho lies below every positive level.
std::size_t start_index(std::span<const double> grid_sigmas, double rho);

}  // namespace pnpdm
