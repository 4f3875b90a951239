#include "pnpdm/oracle.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace pnpdm::oracle {
namespace {

Eigen::LLT<Matrix> checked_llt(const Matrix& m, const char* what) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw std::invalid_argument(std::string(what) + " is not positive definite");
  return llt;
}

Matrix spd_inverse(const Matrix& m, const char* what) {
  return checked_llt(m, what).solve(Matrix::Identity(m.rows(), m.cols()));
}

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

void check_dims(const Vector& mean, const Matrix& cov, const Matrix& A, const Vector& y) {
  const Index n = mean.size();
  if (n > kMaxDenseDim) throw std::invalid_argument("oracle: dense algebra is limited to n <= 4096");
  if (cov.rows() != n || cov.cols() != n) throw std::invalid_argument("oracle: prior covariance must be n x n");
  if (A.cols() != n) throw std::invalid_argument("oracle: operator column count must equal n");
  if (y.size() != A.rows()) throw std::invalid_argument("oracle: measurement size mismatch");
}

double log_normal_density(const Vector& y, const Vector& mean, const Matrix& cov) {
  const Eigen::LLT<Matrix> llt = checked_llt(cov, "evidence covariance");
  const Vector diff = y - mean;
  const Vector w = llt.matrixL().solve(diff);
  double logdet = 0.0;
  for (Index i = 0; i < cov.rows(); ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * (w.squaredNorm() + logdet + static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi));
}

}  // namespace

GaussianPosterior gaussian_posterior(const Vector& prior_mean, const Matrix& prior_cov, const Matrix& A,
                                     double sigma_y, const Vector& y) {
  check_dims(prior_mean, prior_cov, A, y);
  if (!(sigma_y > 0.0)) throw std::invalid_argument("oracle: sigma_y must be positive");
  const Matrix prior_prec = spd_inverse(prior_cov, "prior covariance");
  const double w = 1.0 / (sigma_y * sigma_y);
  Matrix prec = prior_prec + w * A.transpose() * A;
  prec = 0.5 * (prec + prec.transpose());
  const Eigen::LLT<Matrix> llt = checked_llt(prec, "posterior precision");
  GaussianPosterior post;
  post.covariance = symmetrized(llt.solve(Matrix::Identity(prec.rows(), prec.cols())));
  post.mean = llt.solve(prior_prec * prior_mean + w * A.transpose() * y);
  return post;
}

GaussianPosterior gaussian_posterior(const GaussianPrior& prior, const LinearOperator& A, double sigma_y,
                                     const Vector& y) {
  return gaussian_posterior(prior.mean(), prior.covariance(), materialize(A), sigma_y, y);
}

std::vector<GmmComponent> gmm_posterior(const std::vector<GmmComponent>& prior, const Matrix& A, double sigma_y,
                                        const Vector& y) {
  if (prior.empty()) throw std::invalid_argument("oracle: empty mixture");
  std::vector<GmmComponent> out;
  std::vector<double> log_w;
  const Matrix noise = sigma_y * sigma_y * Matrix::Identity(A.rows(), A.rows());
  for (const auto& c : prior) {
    const GaussianPosterior post = gaussian_posterior(c.mean, c.covariance, A, sigma_y, y);
    const Matrix evidence_cov = A * c.covariance * A.transpose() + noise;
    log_w.push_back(c.weight > 0.0 ? std::log(c.weight) + log_normal_density(y, A * c.mean, evidence_cov)
                                   : -std::numeric_limits<double>::infinity());
    out.push_back({0.0, post.mean, post.covariance});
  }
  const double top = *std::max_element(log_w.begin(), log_w.end());
  double total = 0.0;
  for (double v : log_w) total += std::exp(v - top);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].weight = std::exp(log_w[i] - top) / total;
  return out;
}

std::vector<GmmComponent> gmm_posterior(const GmmPrior& prior, const LinearOperator& A, double sigma_y,
                                        const Vector& y) {
  std::vector<GmmComponent> comps;
  for (std::size_t i = 0; i < prior.size(); ++i)
    comps.push_back({prior.weights()[i], prior.components()[i].mean(), prior.components()[i].covariance()});
  return gmm_posterior(comps, materialize(A), sigma_y, y);
}

GaussianPosterior JointGaussian::x_marginal() const {
  const Index n = dim();
  return {mean.head(n), covariance.topLeftCorner(n, n)};
}

GaussianPosterior JointGaussian::z_marginal() const {
  const Index n = dim();
  return {mean.tail(n), covariance.bottomRightCorner(n, n)};
}

JointGaussian joint_pi_gaussian(const Vector& prior_mean, const Matrix& prior_cov, const Matrix& A, double sigma_y,
                                const Vector& y, double rho) {
  check_dims(prior_mean, prior_cov, A, y);
  if (!(rho > 0.0)) throw std::invalid_argument("oracle: rho must be positive");
  if (!(sigma_y > 0.0)) throw std::invalid_argument("oracle: sigma_y must be positive");
  const Index n = prior_mean.size();
  const Matrix prior_prec = spd_inverse(prior_cov, "prior covariance");
  const double c = 1.0 / (rho * rho);
  const double w = 1.0 / (sigma_y * sigma_y);
  const Matrix eye = Matrix::Identity(n, n);

  JointGaussian joint;
  joint.precision.resize(2 * n, 2 * n);
  joint.precision.topLeftCorner(n, n) = prior_prec + c * eye;
  joint.precision.bottomRightCorner(n, n) = w * A.transpose() * A + c * eye;
  joint.precision.topRightCorner(n, n) = -c * eye;
  joint.precision.bottomLeftCorner(n, n) = -c * eye;
  joint.precision = 0.5 * (joint.precision + joint.precision.transpose()).eval();

  const Eigen::LLT<Matrix> llt = checked_llt(joint.precision, "joint precision");
  Vector linear(2 * n);
  linear.head(n) = prior_prec * prior_mean;
  linear.tail(n) = w * A.transpose() * y;
  joint.mean = llt.solve(linear);
  joint.covariance = symmetrized(llt.solve(Matrix::Identity(2 * n, 2 * n)));
  return joint;
}

JointGaussian joint_pi_gaussian(const GaussianPrior& prior, const LinearOperator& A, double sigma_y, const Vector& y,
                                double rho) {
  return joint_pi_gaussian(prior.mean(), prior.covariance(), materialize(A), sigma_y, y, rho);
}

GridPosterior::GridPosterior(std::vector<GridAxis> axes, std::vector<double> density)
    : axes_(std::move(axes)), density_(std::move(density)) {}

Vector GridPosterior::point(Index flat) const {
  Vector p(static_cast<Index>(axes_.size()));
  for (Index d = static_cast<Index>(axes_.size()) - 1; d >= 0; --d) {
    const GridAxis& ax = axes_[static_cast<std::size_t>(d)];
    p[d] = ax.at(flat % ax.points);
    flat /= ax.points;
  }
  return p;
}

double GridPosterior::integrate(const std::function<double(const Vector&, double)>& fn) const {
  double total = 0.0;
  const Index count = static_cast<Index>(density_.size());
  for (Index flat = 0; flat < count; ++flat) {
    double weight = 1.0;
    Index rem = flat;
    for (Index d = static_cast<Index>(axes_.size()) - 1; d >= 0; --d) {
      const GridAxis& ax = axes_[static_cast<std::size_t>(d)];
      const Index i = rem % ax.points;
      rem /= ax.points;
      weight *= ax.step() * ((i == 0 || i == ax.points - 1) ? 0.5 : 1.0);
    }
    total += weight * fn(point(flat), density_[static_cast<std::size_t>(flat)]);
  }
  return total;
}

Vector GridPosterior::mean() const {
  Vector m(static_cast<Index>(axes_.size()));
  for (Index d = 0; d < m.size(); ++d) m[d] = integrate([d](const Vector& p, double dens) { return p[d] * dens; });
  return m;
}

Matrix GridPosterior::covariance() const {
  const Vector m = mean();
  const Index n = m.size();
  Matrix cov(n, n);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b <= a; ++b) {
      cov(a, b) = integrate([&](const Vector& p, double dens) { return (p[a] - m[a]) * (p[b] - m[b]) * dens; });
      cov(b, a) = cov(a, b);
    }
  return cov;
}

double GridPosterior::mass(const std::function<bool(const Vector&)>& inside) const {
  return integrate([&](const Vector& p, double dens) { return inside(p) ? dens : 0.0; });
}

GridPosterior grid_posterior(const std::function<double(const Vector&)>& neg_log_likelihood,
                             const std::function<double(const Vector&)>& neg_log_prior, std::vector<GridAxis> axes) {
  if (axes.empty() || axes.size() > 2) throw std::invalid_argument("grid posterior: dimension must be 1 or 2");
  Index total = 1;
  for (const auto& ax : axes) {
    if (ax.points < 2 || !(ax.hi > ax.lo)) throw std::invalid_argument("grid posterior: invalid axis");
    total *= ax.points;
  }
  if (total > kMaxGridPoints) throw std::invalid_argument("grid posterior: grid too large");

  std::vector<double> logp(static_cast<std::size_t>(total));
  double top = -std::numeric_limits<double>::infinity();
  for (Index flat = 0; flat < total; ++flat) {
    Vector p(static_cast<Index>(axes.size()));
    Index rem = flat;
    for (Index d = static_cast<Index>(axes.size()) - 1; d >= 0; --d) {
      const GridAxis& ax = axes[static_cast<std::size_t>(d)];
      p[d] = ax.at(rem % ax.points);
      rem /= ax.points;
    }
    const double v = -neg_log_likelihood(p) - neg_log_prior(p);
    logp[static_cast<std::size_t>(flat)] = v;
    top = std::max(top, v);
  }
  if (!std::isfinite(top)) throw std::invalid_argument("grid posterior: density vanishes on the grid");
  std::vector<double> density(logp.size());
  for (std::size_t i = 0; i < logp.size(); ++i) density[i] = std::exp(logp[i] - top);
  GridPosterior raw(axes, density);
  const double z = raw.mass([](const Vector&) { return true; });
  for (double& d : density) d /= z;
  return GridPosterior(std::move(axes), std::move(density));
}

GridPosterior grid_posterior(const LikelihoodPotential& f, const std::function<double(const Vector&)>& neg_log_prior,
                             std::vector<GridAxis> axes) {
  return grid_posterior([&f](const Vector& x) { return f.value(x); }, neg_log_prior, std::move(axes));
}

}  // namespace pnpdm::oracle
