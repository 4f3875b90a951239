#pragma once

#include "pnpdm/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace pnpdm {

/// Posterior-mean denoiser D(x; sigma): the estimate of clean data from data
/// corrupted by i.i.d. Gaussian noise of level sigma.
///
/// Implementations must return x unchanged at sigma = 0. When a score is
/// available it satisfies D(x; sigma) = x + sigma^2 * score(x; sigma).
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual Index dim() const = 0;
  virtual Vector denoise(const Vector& x, double sigma) const = 0;
  // Gradient of the log of the sigma-mollified prior density, if known.
  virtual std::optional<Vector> score(const Vector& /*x*/, double /*sigma*/) const { return std::nullopt; }
};

/// Gaussian prior N(mean, covariance), stored as covariance = V diag(lambda) V^T.
/// An empty basis means V = I (diagonal covariance).
class GaussianPrior {
 public:
  static GaussianPrior from_covariance(Vector mean, const Matrix& covariance);
  static GaussianPrior from_eigen(Vector mean, Matrix basis, Vector eigenvalues);
  static GaussianPrior diagonal(Vector mean, Vector variances);
  static GaussianPrior isotropic(Vector mean, double variance);

  Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const Vector& eigenvalues() const { return eigenvalues_; }
  const Matrix& basis() const { return basis_; }
  bool is_diagonal() const { return basis_.size() == 0; }
  Matrix covariance() const;

  // V diag(g(lambda)) V^T x.
  Vector apply_spectral(const Vector& x, const std::function<double(double)>& g) const;

  Vector denoise(const Vector& z, double sigma) const;
  // -(Sigma + sigma^2 I)^-1 (z - mean).
  Vector score(const Vector& z, double sigma) const;
  // log N(z; mean, Sigma + sigma^2 I).
  double log_density(const Vector& z, double sigma) const;
  Vector sample(Rng& rng) const;

 private:
  GaussianPrior(Vector mean, Matrix basis, Vector eigenvalues);

  Vector mean_;
  Matrix basis_;
  Vector eigenvalues_;
};

/// Finite Gaussian mixture prior.
class GmmPrior {
 public:
  GmmPrior(std::vector<double> weights, std::vector<GaussianPrior> components);

  Index dim() const { return components_.front().dim(); }
  std::size_t size() const { return components_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<GaussianPrior>& components() const { return components_; }

  // Posterior component probabilities of z under the sigma-mollified mixture.
  std::vector<double> responsibilities(const Vector& z, double sigma) const;
  double log_density(const Vector& z, double sigma) const;
  Vector sample(Rng& rng) const;

 private:
  std::vector<double> log_terms(const Vector& z, double sigma) const;

  std::vector<double> weights_;
  std::vector<GaussianPrior> components_;
};

Vector gaussian_denoise(const GaussianPrior& prior, const Vector& z, double sigma);
Vector gmm_denoise(const GmmPrior& prior, const Vector& z, double sigma);
Vector gmm_score(const GmmPrior& prior, const Vector& z, double sigma);

class GaussianDenoiser final : public Denoiser {
 public:
  explicit GaussianDenoiser(GaussianPrior prior) : prior_(std::move(prior)) {}
  Index dim() const override { return prior_.dim(); }
  Vector denoise(const Vector& x, double sigma) const override { return gaussian_denoise(prior_, x, sigma); }
  std::optional<Vector> score(const Vector& x, double sigma) const override { return prior_.score(x, sigma); }
  const GaussianPrior& prior() const { return prior_; }

 private:
  GaussianPrior prior_;
};

class GmmDenoiser final : public Denoiser {
 public:
  explicit GmmDenoiser(GmmPrior prior) : prior_(std::move(prior)) {}
  Index dim() const override { return prior_.dim(); }
  Vector denoise(const Vector& x, double sigma) const override { return gmm_denoise(prior_, x, sigma); }
  std::optional<Vector> score(const Vector& x, double sigma) const override { return gmm_score(prior_, x, sigma); }
  const GmmPrior& prior() const { return prior_; }

 private:
  GmmPrior prior_;
};

/// Wraps an arbitrary callable as a denoiser; sigma = 0 still short-circuits.
class FunctionDenoiser final : public Denoiser {
 public:
  using Fn = std::function<Vector(const Vector&, double)>;
  FunctionDenoiser(Index dim, Fn fn) : dim_(dim), fn_(std::move(fn)) {}
  Index dim() const override { return dim_; }
  Vector denoise(const Vector& x, double sigma) const override { return sigma == 0.0 ? x : fn_(x, sigma); }

 private:
  Index dim_;
  Fn fn_;
};

// Raw noise predictor F(x; c_noise) trained under the VP formulation.
using RawPredictor = std::function<Vector(const Vector& x, double c_noise)>;

struct VpCoefficients {
  double c_skip;
  double c_out;
  double c_in;
  double c_noise;
};

VpCoefficients vp_coefficients(double sigma);

/// D(x; sigma) = c_skip x + c_out F(c_in x; c_noise) with c_skip = 1,
/// c_out = -sigma, c_in = 1/sqrt(sigma^2 + 1), c_noise = 999 sigma_VP^-1(sigma).
Vector vp_precondition(const RawPredictor& raw, const Vector& x, double sigma);

class VpPreconditionedDenoiser final : public Denoiser {
 public:
  VpPreconditionedDenoiser(Index dim, RawPredictor raw) : dim_(dim), raw_(std::move(raw)) {}
  Index dim() const override { return dim_; }
  Vector denoise(const Vector& x, double sigma) const override { return vp_precondition(raw_, x, sigma); }

 private:
  Index dim_;
  RawPredictor raw_;
};

}  // namespace pnpdm
