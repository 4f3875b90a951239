#include "generators.hpp"
#include "pnpdm/denoisers.hpp"
#include "pnpdm/schedules.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace pnpdm;
using pnpdm::testing::Gen;

namespace {

Vector vec1(double v) { return Vector::Constant(1, v); }

GmmPrior symmetric_pair() {
  return GmmPrior({0.5, 0.5}, {GaussianPrior::isotropic(vec1(-1.0), 0.01), GaussianPrior::isotropic(vec1(1.0), 0.01)});
}

GmmPrior random_gmm(Gen& g, Index n, std::size_t k) {
  std::vector<double> w(k);
  double total = 0.0;
  for (auto& x : w) total += (x = g.uniform(0.1, 1.0));
  for (auto& x : w) x /= total;
  std::vector<GaussianPrior> comps;
  for (std::size_t i = 0; i < k; ++i) comps.push_back(GaussianPrior::from_covariance(g.vector(n, 2.0), g.spd(n)));
  return GmmPrior(std::move(w), std::move(comps));
}

}  // namespace

TEST_CASE("gaussian denoise examples") {
  const GaussianPrior p = GaussianPrior::isotropic(vec1(0.0), 1.0);
  CHECK(gaussian_denoise(p, vec1(2.0), 1.0)[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p.score(vec1(2.0), 1.0)[0] == doctest::Approx(-1.0).epsilon(1e-15));

  Gen g(1);
  const Vector mu = g.vector(5);
  const GaussianPrior q = GaussianPrior::from_covariance(mu, g.spd(5));
  const Vector z = g.vector(5);
  CHECK(gaussian_denoise(q, z, 0.0) == z);
  CHECK((gaussian_denoise(q, mu, 0.7) - mu).norm() < 1e-12);
}

TEST_CASE("gaussian denoise matches the direct formula") {
  Gen g(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = g.integer(1, 6);
    const Vector mu = g.vector(n);
    const Matrix cov = g.spd(n);
    const GaussianPrior p = GaussianPrior::from_covariance(mu, cov);
    const Vector z = g.vector(n, 3.0);
    const double sigma = g.log_uniform(1e-3, 10.0);
    const Matrix tot = cov + sigma * sigma * Matrix::Identity(n, n);
    const Vector direct = mu + cov * tot.llt().solve(z - mu);
    REQUIRE((gaussian_denoise(p, z, sigma) - direct).norm() < 1e-10 * (1.0 + direct.norm()));
  }
}

TEST_CASE("gaussian denoise contracts toward the mean") {
  Gen g(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = g.integer(1, 8);
    const Vector mu = g.vector(n);
    const GaussianPrior p = GaussianPrior::from_covariance(mu, g.spd(n, 0.01, 10.0));
    const Vector z = g.vector(n, 5.0);
    const double sigma = g.uniform(0.0, 5.0);
    REQUIRE((gaussian_denoise(p, z, sigma) - mu).norm() <= (z - mu).norm() * (1.0 + 1e-12));
  }
}

TEST_CASE("gaussian prior representations agree") {
  Gen g(4);
  const Vector mu = g.vector(3);
  const Vector var = (g.vector(3).array().abs() + 0.1).matrix();
  const GaussianPrior diag = GaussianPrior::diagonal(mu, var);
  const GaussianPrior dense = GaussianPrior::from_covariance(mu, Matrix(var.asDiagonal()));
  const Vector z = g.vector(3);
  CHECK((diag.denoise(z, 0.4) - dense.denoise(z, 0.4)).norm() < 1e-12);
  CHECK(diag.log_density(z, 0.4) == doctest::Approx(dense.log_density(z, 0.4)).epsilon(1e-12));
  CHECK(diag.is_diagonal());
  CHECK((dense.covariance() - Matrix(var.asDiagonal())).norm() < 1e-12);
}

TEST_CASE("gaussian prior rejects bad covariances") {
  Matrix asym(2, 2);
  asym << 1.0, 0.5, 0.0, 1.0;
  CHECK_THROWS_AS(GaussianPrior::from_covariance(Vector::Zero(2), asym), std::invalid_argument);
  Matrix indef(2, 2);
  indef << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(GaussianPrior::from_covariance(Vector::Zero(2), indef), std::invalid_argument);
  CHECK_THROWS_AS(GaussianPrior::from_covariance(Vector::Zero(3), Matrix::Identity(2, 2)), std::invalid_argument);
  CHECK_THROWS_AS(GaussianPrior::isotropic(Vector::Zero(2), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(GaussianPrior::from_eigen(Vector::Zero(2), Matrix::Ones(2, 2), Vector::Ones(2)), std::invalid_argument);
}

TEST_CASE("gmm denoise examples") {
  const GmmPrior pair = symmetric_pair();
  for (double sigma : {0.1, 0.5, 2.0}) CHECK(std::abs(gmm_denoise(pair, vec1(0.0), sigma)[0]) < 1e-15);
  // E[x | x + 0.5 eps = 0.5], evaluated by 40-digit quadrature and closed form.
  CHECK(gmm_denoise(pair, vec1(0.5), 0.5)[0] == doctest::Approx(0.9405481552495755690).epsilon(1e-13));
  CHECK(gmm_denoise(pair, vec1(0.3), 0.0)[0] == 0.3);
  CHECK(std::abs(gmm_score(pair, vec1(0.0), 0.5)[0]) < 1e-15);
}

TEST_CASE("gmm denoise agrees with a numerical quadrature") {
  // Trapezoid rule for E[x | z] = int x p(x) N(z; x, s^2) dx / int p(x) N(z; x, s^2) dx.
  const double z = 0.5, s = 0.5;
  const Index points = 1'000'000;
  const double lo = -3.0, hi = 3.0, h = (hi - lo) / static_cast<double>(points - 1);
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < points; ++i) {
    const double x = lo + h * static_cast<double>(i);
    const double prior = 0.5 * std::exp(-(x + 1) * (x + 1) / 0.02) + 0.5 * std::exp(-(x - 1) * (x - 1) / 0.02);
    const double w = prior * std::exp(-(z - x) * (z - x) / (2 * s * s)) * ((i == 0 || i == points - 1) ? 0.5 : 1.0);
    num += x * w;
    den += w;
  }
  CHECK(gmm_denoise(symmetric_pair(), vec1(z), s)[0] == doctest::Approx(num / den).epsilon(1e-9));
}

TEST_CASE("single-component mixture equals the gaussian denoiser") {
  Gen g(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Index n = g.integer(1, 6);
    const GaussianPrior p = GaussianPrior::from_covariance(g.vector(n), g.spd(n));
    const GmmPrior one({1.0}, {p});
    const Vector z = g.vector(n, 2.0);
    const double sigma = g.log_uniform(1e-2, 10.0);
    REQUIRE((gmm_denoise(one, z, sigma) - gaussian_denoise(p, z, sigma)).norm() < 1e-12 * (1.0 + z.norm()));
    REQUIRE((gmm_score(one, z, sigma) - p.score(z, sigma)).norm() < 1e-12 * (1.0 + z.norm()));
  }
}

TEST_CASE("tweedie consistency for mixtures") {
  Gen g(6);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = g.integer(1, 4);
    const GmmPrior p = random_gmm(g, n, static_cast<std::size_t>(g.integer(1, 4)));
    const Vector z = g.vector(n, 3.0);
    const double sigma = g.log_uniform(1e-2, 5.0);
    const Vector lhs = gmm_denoise(p, z, sigma);
    const Vector rhs = z + sigma * sigma * gmm_score(p, z, sigma);
    REQUIRE((lhs - rhs).norm() < 1e-9 * (1.0 + z.norm()));
  }
}

TEST_CASE("gmm score matches finite differences of the log density") {
  Gen g(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = g.integer(1, 3);
    const GmmPrior p = random_gmm(g, n, 3);
    const Vector z = g.vector(n, 2.0);
    const double sigma = g.log_uniform(0.1, 3.0);
    const Vector fd = testing::numeric_gradient([&](const Vector& v) { return p.log_density(v, sigma); }, z, 1e-5);
    const Vector an = gmm_score(p, z, sigma);
    REQUIRE((an - fd).norm() <= 1e-6 * std::max(an.norm(), 1e-3));
  }
}

TEST_CASE("score is near zero at a component mean of a well separated mixture") {
  const GmmPrior p({0.3, 0.7}, {GaussianPrior::isotropic(vec1(-50.0), 1.0), GaussianPrior::isotropic(vec1(50.0), 1.0)});
  CHECK(std::abs(gmm_score(p, vec1(50.0), 0.5)[0]) < 1e-12);
  const double fd = (p.log_density(vec1(50.0 + 1e-5), 0.5) - p.log_density(vec1(50.0 - 1e-5), 0.5)) / 2e-5;
  CHECK(std::abs(fd) < 1e-6);
}

TEST_CASE("responsibilities survive underflow") {
  const GmmPrior p = symmetric_pair();
  const auto r = p.responsibilities(vec1(40.0), 1e-3);
  CHECK(r[0] == 0.0);
  CHECK(r[1] == 1.0);
  CHECK(std::isfinite(gmm_denoise(p, vec1(40.0), 1e-3)[0]));
}

TEST_CASE("gmm validation") {
  const auto c = GaussianPrior::isotropic(vec1(0.0), 1.0);
  CHECK_THROWS_AS(GmmPrior({0.5, 0.6}, {c, c}), std::invalid_argument);
  CHECK_THROWS_AS(GmmPrior({-0.5, 1.5}, {c, c}), std::invalid_argument);
  CHECK_THROWS_AS(GmmPrior({1.0}, {c, c}), std::invalid_argument);
  CHECK_THROWS_AS(GmmPrior({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(GmmPrior({0.5, 0.5}, {c, GaussianPrior::isotropic(Vector::Zero(2), 1.0)}), std::invalid_argument);
  CHECK_NOTHROW(GmmPrior({0.5, 0.5 + 1e-13}, {c, c}));
}

TEST_CASE("vp preconditioning") {
  const Vector x = Vector::LinSpaced(4, -1.0, 2.0);
  RawPredictor any = [](const Vector& v, double) { return Vector(v.array().sin()); };
  RawPredictor zero = [](const Vector& v, double) { return Vector(Vector::Zero(v.size())); };
  CHECK(vp_precondition(any, x, 0.0) == x);
  CHECK(vp_precondition(zero, x, 3.0) == x);
  CHECK(vp_coefficients(1.0).c_in == doctest::Approx(0.7071067811865476).epsilon(1e-15));
  CHECK(vp_coefficients(0.0).c_noise == 0.0);
  CHECK(vp_coefficients(2.0).c_out == -2.0);
  CHECK(vp_coefficients(2.0).c_skip == 1.0);
  CHECK(vp_coefficients(2.0).c_noise == doctest::Approx(999.0 * sigma_vp_inverse(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(vp_coefficients(200.0), std::domain_error);

  // The wrapper sees c_in x and c_noise; D = x - sigma F.
  double seen_noise = -1.0;
  RawPredictor probe = [&](const Vector& v, double c_noise) {
    seen_noise = c_noise;
    return v;
  };
  const Vector d = vp_precondition(probe, x, 1.0);
  CHECK((d - (x - x / std::sqrt(2.0))).norm() < 1e-15);
  CHECK(seen_noise == doctest::Approx(999.0 * sigma_vp_inverse(1.0)));
}

TEST_CASE("denoiser adapters") {
  const GaussianPrior p = GaussianPrior::isotropic(Vector::Zero(2), 1.0);
  const GaussianDenoiser gd(p);
  const Vector z = Vector::Constant(2, 2.0);
  CHECK(gd.dim() == 2);
  CHECK((gd.denoise(z, 1.0) - Vector::Constant(2, 1.0)).norm() < 1e-15);
  CHECK((gd.denoise(z, 1.0) - (z + gd.score(z, 1.0).value())).norm() < 1e-15);
  const FunctionDenoiser fd(2, [](const Vector& v, double) { return Vector(2.0 * v); });
  CHECK(fd.denoise(z, 0.0) == z);
  CHECK(fd.denoise(z, 1.0) == 2.0 * z);
  CHECK_FALSE(fd.score(z, 1.0).has_value());
}

TEST_CASE("prior sampling moments") {
  Gen g(8);
  const Matrix cov = g.spd(3);
  const GaussianPrior p = GaussianPrior::from_covariance(Vector::Constant(3, 1.0), cov);
  Rng rng(1);
  const int n = 200000;
  Matrix s(n, 3);
  for (int i = 0; i < n; ++i) s.row(i) = p.sample(rng).transpose();
  const Vector mean = s.colwise().mean();
  const Matrix c = s.rowwise() - mean.transpose();
  const Matrix emp = c.transpose() * c / (n - 1);
  CHECK((mean - Vector::Constant(3, 1.0)).norm() < 0.02);
  CHECK((emp - cov).norm() < 0.03 * cov.norm());
}
