#include "generators.hpp"
#include "pnpdm/oracle.hpp"
#include "pnpdm/sampler.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace pnpdm;
using pnpdm::testing::Gen;

namespace {

std::shared_ptr<const LikelihoodStep> exact_step(const Matrix& a, const Vector& y, double sigma_y) {
  return std::make_shared<ExactLikelihoodStep>(LinearGaussianLikelihood(std::make_shared<DenseOperator>(a), y, sigma_y));
}

CouplingSchedule constant_rho(double rho) { return {rho, rho, 1.0}; }

class NanStep final : public LikelihoodStep {
 public:
  Index dim() const override { return 2; }
  Vector sample(const Vector&, double, Rng&) const override {
    return Vector::Constant(2, std::numeric_limits<double>::quiet_NaN());
  }
  std::string name() const override { return "broken"; }
};

// Batch-means standard error for an autocorrelated series.
double batch_se(const Vector& v, Index batches) {
  const Index len = v.size() / batches;
  Vector means(batches);
  for (Index b = 0; b < batches; ++b) means[b] = v.segment(b * len, len).mean();
  const double m = means.mean();
  return std::sqrt((means.array() - m).square().sum() / static_cast<double>(batches - 1) / static_cast<double>(batches));
}

}  // namespace

TEST_CASE("retained iterations") {
  CHECK(sample_iterations(100, 40, 3).size() == 20);
  CHECK(sample_iterations(100, 40, 3).front() == 40);
  CHECK(sample_iterations(100, 40, 3).back() == 97);
  CHECK(sample_iterations(10, 0, 1).size() == 10);
  CHECK_THROWS_AS(sample_iterations(10, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_iterations(10, 0, 0), std::invalid_argument);
  Gen g(1);
  for (int i = 0; i < 200; ++i) {
    const auto k = static_cast<std::int64_t>(g.integer(1, 500));
    const auto b = static_cast<std::int64_t>(g.integer(0, k - 1));
    const auto t = static_cast<std::int64_t>(g.integer(1, 20));
    if ((k - b) / t == 0) {
      REQUIRE_THROWS_AS(sample_iterations(k, b, t), std::invalid_argument);
      continue;
    }
    REQUIRE(static_cast<std::int64_t>(sample_iterations(k, b, t).size()) == (k - b) / t);
  }
}

TEST_CASE("initialization kinds") {
  Rng rng(1);
  CHECK(initialize(InitKind::Zeros, 4, rng) == Vector::Zero(4));
  Rng a(5), b(5);
  CHECK(initialize(InitKind::StdNormal, 6, a) == initialize(InitKind::StdNormal, 6, b));
  const Vector u = initialize(InitKind::Uniform01, 1000, rng);
  CHECK(u.minCoeff() >= 0.0);
  CHECK(u.maxCoeff() < 1.0);
  CHECK(parse_init_kind("uniform01") == InitKind::Uniform01);
  CHECK_THROWS_AS(parse_init_kind("ones"), std::invalid_argument);
}

TEST_CASE("config validation") {
  SamplerConfig cfg;
  cfg.iterations = 10;
  cfg.burn_in = 10;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.burn_in = 0;
  cfg.thin = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.thin = 1;
  cfg.chains = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.chains = 1;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("one iteration through degenerate steps") {
  // A = 0 gives z ~ N(x, rho^2 I); rho below the diffusion grid makes the prior step the identity.
  const Index n = 20000;
  const double rho = 1e-3;
  DiffusionScheduleParams p;
  PriorStepConfig pc;
  pc.schedule = DiffusionSchedule(p);
  pc.denoiser = std::make_shared<GaussianDenoiser>(GaussianPrior::isotropic(Vector::Zero(n), 1.0));
  SamplerConfig cfg;
  cfg.iterations = 1;
  cfg.burn_in = 0;
  cfg.thin = 1;
  cfg.coupling = constant_rho(rho);
  const PnpDmSampler sampler(std::make_shared<ExactLikelihoodStep>(LinearGaussianLikelihood(
                                 std::make_shared<BlockAverage>(Shape2{1, n}, 1), Vector::Zero(n), 1e300)),
                             std::make_shared<DiffusionPriorStep>(pc), cfg);
  const ChainRecord rec = sampler.run_chain(0);
  CHECK(rec.prior_identity_steps == 1);
  const Vector x1 = rec.final_x;
  CHECK(std::abs(x1.mean()) < 4.0 * rho / std::sqrt(static_cast<double>(n)));
  CHECK(pnpdm::testing::rel_err(x1.squaredNorm() / n, rho * rho) < 0.03);
}

TEST_CASE("chains are reproducible and independent of threading") {
  const Index n = 3;
  Gen g(2);
  DiffusionScheduleParams p;
  p.steps = 20;
  PriorStepConfig pc;
  pc.schedule = DiffusionSchedule(p);
  pc.denoiser = std::make_shared<GaussianDenoiser>(GaussianPrior::isotropic(Vector::Zero(n), 1.0));
  SamplerConfig cfg;
  cfg.iterations = 12;
  cfg.burn_in = 2;
  cfg.thin = 2;
  cfg.chains = 3;
  cfg.init = InitKind::StdNormal;
  cfg.seed = 77;
  cfg.keep_iterates = true;
  cfg.threads = 1;
  const auto lik = exact_step(g.matrix(2, n), g.vector(2), 0.1);
  const auto prior = std::make_shared<DiffusionPriorStep>(pc);
  const auto serial = PnpDmSampler(lik, prior, cfg).run();
  cfg.threads = 3;
  const auto parallel = PnpDmSampler(lik, prior, cfg).run();
  REQUIRE(serial.size() == 3);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(serial[c].samples == parallel[c].samples);
    CHECK(serial[c].final_x == parallel[c].final_x);
    CHECK(serial[c].samples.rows() == 5);
    CHECK(collect_samples(serial[c], 2, 2) == serial[c].samples);
    CHECK(serial[c].iterates.size() == 12);
  }
  CHECK(serial[0].samples != serial[1].samples);
  CHECK(serial[0].seed != serial[1].seed);
  CHECK(stack_samples(serial).rows() == 15);

  cfg.seed = 78;
  CHECK(PnpDmSampler(lik, prior, cfg).run_chain(0).samples != serial[0].samples);
}

TEST_CASE("non-finite iterates abort with context") {
  SamplerConfig cfg;
  cfg.iterations = 5;
  cfg.burn_in = 0;
  cfg.thin = 1;
  const PnpDmSampler sampler(std::make_shared<NanStep>(),
                             std::make_shared<ExactGaussianPriorStep>(GaussianPrior::isotropic(Vector::Zero(2), 1.0)), cfg);
  try {
    sampler.run_chain(0);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    const std::string what = e.what();
    CHECK(what.find("k=0") != std::string::npos);
    CHECK(what.find("broken") != std::string::npos);
  }
}

TEST_CASE("dimension mismatch is rejected") {
  CHECK_THROWS_AS(PnpDmSampler(std::make_shared<NanStep>(),
                               std::make_shared<ExactGaussianPriorStep>(GaussianPrior::isotropic(Vector::Zero(3), 1.0)),
                               SamplerConfig{}),
                  std::invalid_argument);
}

TEST_CASE("stationary joint matches the analytic coupled Gaussian") {
  const Matrix a = Matrix::Constant(1, 1, 1.5);
  const Vector y = Vector::Constant(1, 1.0);
  const double sigma_y = 0.8, rho = 1.0;
  const GaussianPrior prior = GaussianPrior::isotropic(Vector::Constant(1, 0.5), 1.0);
  SamplerConfig cfg;
  cfg.iterations = 10000;
  cfg.burn_in = 0;
  cfg.thin = 1;
  cfg.coupling = constant_rho(rho);
  cfg.keep_iterates = true;
  const ChainRecord rec =
      PnpDmSampler(exact_step(a, y, sigma_y), std::make_shared<ExactGaussianPriorStep>(prior), cfg).run_chain(0);

  // (x^(k), z^(k)) pairs after a short warm-up.
  const Index warm = 100, count = 9900;
  Vector xs(count), zs(count);
  for (Index i = 0; i < count; ++i) {
    xs[i] = rec.iterates[static_cast<std::size_t>(warm + i - 1)].x[0];
    zs[i] = rec.iterates[static_cast<std::size_t>(warm + i)].z[0];
  }
  const auto joint = oracle::joint_pi_gaussian(prior.mean(), prior.covariance(), a, sigma_y, y, rho);
  CHECK(std::abs(xs.mean() - joint.mean[0]) < 3.0 * batch_se(xs, 50));
  CHECK(std::abs(zs.mean() - joint.mean[1]) < 3.0 * batch_se(zs, 50));
  const double mx = xs.mean(), mz = zs.mean();
  const double cxx = (xs.array() - mx).square().sum() / (count - 1);
  const double czz = (zs.array() - mz).square().sum() / (count - 1);
  const double cxz = ((xs.array() - mx) * (zs.array() - mz)).sum() / (count - 1);
  CHECK(pnpdm::testing::rel_err(cxx, joint.covariance(0, 0)) < 0.05);
  CHECK(pnpdm::testing::rel_err(czz, joint.covariance(1, 1)) < 0.05);
  CHECK(pnpdm::testing::rel_err(cxz, joint.covariance(0, 1)) < 0.05);
}

namespace {

// Data-dominated 2-D problem so the chains mix within a few iterations at rho_min.
Vector annealed_mean(InitKind init, std::uint64_t seed) {
  Gen g(3);
  const Index n = 2;
  const Matrix a = g.matrix(2, n) + 2.0 * Matrix::Identity(2, n);
  const Vector y = g.vector(2);
  const GaussianPrior prior = GaussianPrior::from_covariance(Vector::Constant(n, 0.5), g.spd(n, 0.5, 1.5));
  SamplerConfig cfg;
  cfg.iterations = 400;
  cfg.burn_in = 100;
  cfg.thin = 1;
  cfg.chains = 200;
  cfg.coupling = {3.0, 0.05, 0.9};
  cfg.init = init;
  cfg.seed = seed;
  const auto chains =
      PnpDmSampler(exact_step(a, y, 0.1), std::make_shared<ExactGaussianPriorStep>(prior), cfg).run();
  return stack_samples(chains).colwise().mean();
}

Vector true_mean() {
  Gen g(3);
  const Matrix a = g.matrix(2, 2) + 2.0 * Matrix::Identity(2, 2);
  const Vector y = g.vector(2);
  const Matrix cov = g.spd(2, 0.5, 1.5);
  return oracle::gaussian_posterior(Vector::Constant(2, 0.5), cov, a, 0.1, y).mean;
}

}  // namespace

TEST_CASE("annealed chains reach the posterior mean and forget the initialization") {
  const Vector truth = true_mean();
  const Vector zeros = annealed_mean(InitKind::Zeros, 1);
  const Vector normal = annealed_mean(InitKind::StdNormal, 2);
  CAPTURE(truth.transpose());
  CAPTURE(zeros.transpose());
  CHECK(pnpdm::testing::rel_err(zeros, truth) < 0.02);
  CHECK(pnpdm::testing::rel_err(normal, zeros) < 0.02);
}
