#pragma once

#include "pnpdm/denoisers.hpp"
#include "pnpdm/forward_models.hpp"
#include "pnpdm/types.hpp"

#include <functional>
#include <vector>

namespace pnpdm::oracle {

// Ground-truth posteriors for validation. Everything here works on dense
// matrices with Cholesky solves and shares no algebra with the samplers.

inline constexpr Index kMaxDenseDim = 4096;

struct GaussianPosterior {
  Vector mean;
  Matrix covariance;

  Vector stddev() const { return covariance.diagonal().cwiseSqrt(); }
};

/// Conjugate posterior for prior N(mu0, Sigma0) and y = A x + N(0, sigma_y^2 I):
///   Sigma_post = (Sigma0^-1 + A^T A / sigma_y^2)^-1,
///   mu_post = Sigma_post (Sigma0^-1 mu0 + A^T y / sigma_y^2).
GaussianPosterior gaussian_posterior(const Vector& prior_mean, const Matrix& prior_cov, const Matrix& A,
                                     double sigma_y, const Vector& y);
GaussianPosterior gaussian_posterior(const GaussianPrior& prior, const LinearOperator& A, double sigma_y,
                                     const Vector& y);

struct GmmComponent {
  double weight;
  Vector mean;
  Matrix covariance;
};

/// Component-wise conjugate update; weights proportional to w_i N(y; A mu_i, A Sigma_i A^T + sigma_y^2 I).
std::vector<GmmComponent> gmm_posterior(const std::vector<GmmComponent>& prior, const Matrix& A, double sigma_y,
                                        const Vector& y);
std::vector<GmmComponent> gmm_posterior(const GmmPrior& prior, const LinearOperator& A, double sigma_y,
                                        const Vector& y);

/// The stacked (x, z) Gaussian with precision blocks
///   xx: Sigma0^-1 + rho^-2 I,  zz: A^T A / sigma_y^2 + rho^-2 I,  xz: -rho^-2 I.
struct JointGaussian {
  Vector mean;
  Matrix precision;
  Matrix covariance;

  Index dim() const { return mean.size() / 2; }
  GaussianPosterior x_marginal() const;
  GaussianPosterior z_marginal() const;
};

JointGaussian joint_pi_gaussian(const Vector& prior_mean, const Matrix& prior_cov, const Matrix& A, double sigma_y,
                                const Vector& y, double rho);
JointGaussian joint_pi_gaussian(const GaussianPrior& prior, const LinearOperator& A, double sigma_y, const Vector& y,
                                double rho);

struct GridAxis {
  double lo;
  double hi;
  Index points;

  double step() const { return (hi - lo) / static_cast<double>(points - 1); }
  double at(Index i) const { return lo + step() * static_cast<double>(i); }
};

/// exp(-f - g) tabulated on a tensor grid (1-D or 2-D) and normalized with the
/// trapezoid rule.
class GridPosterior {
 public:
  GridPosterior(std::vector<GridAxis> axes, std::vector<double> density);

  const std::vector<GridAxis>& axes() const { return axes_; }
  // Normalized density values, row-major over the axes.
  const std::vector<double>& density() const { return density_; }
  Vector mean() const;
  Matrix covariance() const;
  // Probability mass of the region where `inside` holds.
  double mass(const std::function<bool(const Vector&)>& inside) const;

 private:
  double integrate(const std::function<double(const Vector&, double)>& fn) const;
  Vector point(Index flat) const;

  std::vector<GridAxis> axes_;
  std::vector<double> density_;
};

inline constexpr Index kMaxGridPoints = 1'000'000;

// neg_log_prior is g(x) = -log p(x) up to a constant.
GridPosterior grid_posterior(const std::function<double(const Vector&)>& neg_log_likelihood,
                             const std::function<double(const Vector&)>& neg_log_prior, std::vector<GridAxis> axes);
GridPosterior grid_posterior(const LikelihoodPotential& f, const std::function<double(const Vector&)>& neg_log_prior,
                             std::vector<GridAxis> axes);

}  // namespace pnpdm::oracle
