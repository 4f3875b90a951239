#include "pnpdm/denoisers.hpp"

#include "pnpdm/schedules.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace pnpdm {

GaussianPrior::GaussianPrior(Vector mean, Matrix basis, Vector eigenvalues)
    : mean_(std::move(mean)), basis_(std::move(basis)), eigenvalues_(std::move(eigenvalues)) {
  if (mean_.size() == 0) throw std::invalid_argument("gaussian prior: empty mean");
  if (eigenvalues_.size() != mean_.size()) throw std::invalid_argument("gaussian prior: eigenvalue count mismatch");
  if (basis_.size() != 0 && (basis_.rows() != mean_.size() || basis_.cols() != mean_.size()))
    throw std::invalid_argument("gaussian prior: basis must be n x n");
  if (!(eigenvalues_.minCoeff() > 0.0) || !eigenvalues_.allFinite())
    throw std::invalid_argument("gaussian prior: covariance is not positive definite");
}

GaussianPrior GaussianPrior::from_covariance(Vector mean, const Matrix& covariance) {
  const Index n = mean.size();
  if (covariance.rows() != n || covariance.cols() != n)
    throw std::invalid_argument("gaussian prior: covariance must be n x n");
  const double asym = (covariance - covariance.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * std::max(1.0, covariance.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("gaussian prior: covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (covariance + covariance.transpose()));
  if (eig.info() != Eigen::Success) throw std::invalid_argument("gaussian prior: eigendecomposition failed");
  return GaussianPrior(std::move(mean), eig.eigenvectors(), eig.eigenvalues());
}

GaussianPrior GaussianPrior::from_eigen(Vector mean, Matrix basis, Vector eigenvalues) {
  const Index n = mean.size();
  if (basis.rows() == n && basis.cols() == n) {
    const double err = (basis.transpose() * basis - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
    if (err > 1e-8) throw std::invalid_argument("gaussian prior: basis is not orthonormal");
  }
  return GaussianPrior(std::move(mean), std::move(basis), std::move(eigenvalues));
}

GaussianPrior GaussianPrior::diagonal(Vector mean, Vector variances) {
  return GaussianPrior(std::move(mean), Matrix(), std::move(variances));
}

GaussianPrior GaussianPrior::isotropic(Vector mean, double variance) {
  const Index n = mean.size();
  return diagonal(std::move(mean), Vector::Constant(n, variance));
}

Matrix GaussianPrior::covariance() const {
  if (is_diagonal()) return eigenvalues_.asDiagonal();
  return basis_ * eigenvalues_.asDiagonal() * basis_.transpose();
}

Vector GaussianPrior::apply_spectral(const Vector& x, const std::function<double(double)>& g) const {
  if (x.size() != dim()) throw std::invalid_argument("gaussian prior: dimension mismatch");
  Vector gains = eigenvalues_.unaryExpr(g);
  if (is_diagonal()) return gains.cwiseProduct(x);
  return basis_ * gains.cwiseProduct(basis_.transpose() * x);
}

Vector GaussianPrior::denoise(const Vector& z, double sigma) const {
  if (sigma < 0.0) throw std::invalid_argument("denoise: sigma must be non-negative");
  if (sigma == 0.0) return z;
  const double s2 = sigma * sigma;
  return mean_ + apply_spectral(z - mean_, [s2](double lam) { return lam / (lam + s2); });
}

Vector GaussianPrior::score(const Vector& z, double sigma) const {
  const double s2 = sigma * sigma;
  return -apply_spectral(z - mean_, [s2](double lam) { return 1.0 / (lam + s2); });
}

double GaussianPrior::log_density(const Vector& z, double sigma) const {
  if (z.size() != dim()) throw std::invalid_argument("gaussian prior: dimension mismatch");
  const double s2 = sigma * sigma;
  const Vector diff = z - mean_;
  const Vector coeffs = is_diagonal() ? diff : Vector(basis_.transpose() * diff);
  double quad = 0.0;
  double logdet = 0.0;
  for (Index i = 0; i < coeffs.size(); ++i) {
    const double var = eigenvalues_[i] + s2;
    quad += coeffs[i] * coeffs[i] / var;
    logdet += std::log(var);
  }
  return -0.5 * (quad + logdet + static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi));
}

Vector GaussianPrior::sample(Rng& rng) const {
  Vector eta = standard_normal(dim(), rng);
  return mean_ + apply_spectral(eta, [](double lam) { return std::sqrt(lam); });
}

GmmPrior::GmmPrior(std::vector<double> weights, std::vector<GaussianPrior> components)
    : weights_(std::move(weights)), components_(std::move(components)) {
  if (components_.empty()) throw std::invalid_argument("gmm prior: no components");
  if (weights_.size() != components_.size()) throw std::invalid_argument("gmm prior: weight count mismatch");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw std::invalid_argument("gmm prior: weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("gmm prior: weights must sum to 1");
  for (const auto& c : components_)
    if (c.dim() != components_.front().dim()) throw std::invalid_argument("gmm prior: component dimension mismatch");
}

std::vector<double> GmmPrior::log_terms(const Vector& z, double sigma) const {
  std::vector<double> terms(components_.size());
  for (std::size_t i = 0; i < components_.size(); ++i) {
    terms[i] = weights_[i] > 0.0 ? std::log(weights_[i]) + components_[i].log_density(z, sigma)
                                 : -std::numeric_limits<double>::infinity();
  }
  return terms;
}

std::vector<double> GmmPrior::responsibilities(const Vector& z, double sigma) const {
  std::vector<double> r = log_terms(z, sigma);
  const double top = *std::max_element(r.begin(), r.end());
  double total = 0.0;
  for (double& v : r) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : r) v /= total;
  return r;
}

double GmmPrior::log_density(const Vector& z, double sigma) const {
  const std::vector<double> terms = log_terms(z, sigma);
  const double top = *std::max_element(terms.begin(), terms.end());
  double total = 0.0;
  for (double v : terms) total += std::exp(v - top);
  return top + std::log(total);
}

Vector GmmPrior::sample(Rng& rng) const {
  std::discrete_distribution<std::size_t> pick(weights_.begin(), weights_.end());
  return components_[pick(rng)].sample(rng);
}

Vector gaussian_denoise(const GaussianPrior& prior, const Vector& z, double sigma) { return prior.denoise(z, sigma); }

Vector gmm_denoise(const GmmPrior& prior, const Vector& z, double sigma) {
  if (sigma < 0.0) throw std::invalid_argument("denoise: sigma must be non-negative");
  if (sigma == 0.0) return z;
  const std::vector<double> r = prior.responsibilities(z, sigma);
  Vector out = Vector::Zero(z.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    if (r[i] > 0.0) out += r[i] * prior.components()[i].denoise(z, sigma);
  return out;
}

Vector gmm_score(const GmmPrior& prior, const Vector& z, double sigma) {
  const std::vector<double> r = prior.responsibilities(z, sigma);
  Vector out = Vector::Zero(z.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    if (r[i] > 0.0) out += r[i] * prior.components()[i].score(z, sigma);
  return out;
}

VpCoefficients vp_coefficients(double sigma) {
  if (!(sigma >= 0.0)) throw std::domain_error("vp_precondition: sigma must be non-negative");
  if (sigma > sigma_vp(1.0)) throw std::domain_error("vp_precondition: sigma exceeds sigma_VP(1)");
  return {1.0, -sigma, 1.0 / std::sqrt(sigma * sigma + 1.0), 999.0 * sigma_vp_inverse(sigma)};
}

Vector vp_precondition(const RawPredictor& raw, const Vector& x, double sigma) {
  const VpCoefficients c = vp_coefficients(sigma);
  if (sigma == 0.0) return x;
  return c.c_skip * x + c.c_out * raw(c.c_in * x, c.c_noise);
}

}  // namespace pnpdm
