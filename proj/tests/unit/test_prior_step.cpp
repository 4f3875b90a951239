#include "generators.hpp"
#include "pnpdm/prior_step.hpp"

#include <doctest.h>

#include <cmath>

using namespace pnpdm;
using pnpdm::testing::Gen;

namespace {

PriorStepConfig make_cfg(ScheduleFamily family, std::size_t steps, DiffusionSolver solver,
                         std::shared_ptr<const Denoiser> d) {
  DiffusionScheduleParams p;
  p.family = family;
  p.steps = steps;
  PriorStepConfig cfg;
  cfg.schedule = DiffusionSchedule(p);
  cfg.solver = solver;
  cfg.denoiser = std::move(d);
  return cfg;
}

std::shared_ptr<const Denoiser> unit_gaussian(Index n) {
  return std::make_shared<GaussianDenoiser>(GaussianPrior::isotropic(Vector::Zero(n), 1.0));
}

// Each coordinate is an independent run of the scalar problem.
struct Moments {
  double mean;
  double var;
};

Moments moments(const Vector& v) {
  const double m = v.mean();
  return {m, (v.array() - m).square().sum() / static_cast<double>(v.size() - 1)};
}

}  // namespace

TEST_CASE("rho below the grid returns z") {
  const auto cfg = make_cfg(ScheduleFamily::EDM, 100, DiffusionSolver::SDE, unit_gaussian(3));
  Rng rng(1);
  const Vector z = Vector::LinSpaced(3, -1.0, 1.0);
  PriorStepStats st;
  CHECK(prior_sample(cfg, z, 1e-3, rng, &st) == z);
  CHECK(st.identity);
  CHECK(st.denoiser_calls == 0);
}

TEST_CASE("identity denoiser has zero ODE drift") {
  const auto ident = std::make_shared<FunctionDenoiser>(4, [](const Vector& v, double) { return v; });
  const Vector z = Vector::LinSpaced(4, -2.0, 3.0);
  for (auto family : {ScheduleFamily::EDM, ScheduleFamily::VE}) {
    CAPTURE(to_string(family));
    Rng rng(2);
    CHECK((prior_sample(make_cfg(family, 50, DiffusionSolver::ODE, ident), z, 1.3, rng) - z).norm() < 1e-12);
  }
  // VP keeps only the scale drift, which Euler integrates approximately.
  double previous = 1.0;
  for (std::size_t steps : {50, 200, 800}) {
    Rng rng(2);
    const double err = (prior_sample(make_cfg(ScheduleFamily::VP, steps, DiffusionSolver::ODE, ident), z, 1.3, rng) - z).norm();
    CHECK(err < previous);
    previous = err;
  }
}

TEST_CASE("single ODE Euler step with a Gaussian prior") {
  // A two-level grid (t, 0) forces exactly one step from t to 0.
  DiffusionScheduleParams p;
  p.steps = 2;
  p.sigma_min = 0.5;
  p.sigma_max = 1.5;
  PriorStepConfig cfg;
  cfg.schedule = DiffusionSchedule(p);
  cfg.solver = DiffusionSolver::ODE;
  cfg.denoiser = unit_gaussian(1);
  cfg.snap_ratio = 0.0;
  const double t = 0.5;  // start_index for rho = 0.7 is the 0.5 level
  const double v = 1.7;
  Rng rng(3);
  PriorStepStats st;
  const Vector out = prior_sample(cfg, Vector::Constant(1, v), 0.7, rng, &st);
  CHECK(st.start_index == 1);
  CHECK(st.denoiser_calls == 1);
  CHECK(out[0] == doctest::Approx(v + (0.0 - t) * t * v / (1.0 + t * t)).epsilon(1e-14));
}

TEST_CASE("ODE prior step is deterministic") {
  const auto cfg = make_cfg(ScheduleFamily::VP, 100, DiffusionSolver::ODE, unit_gaussian(5));
  Rng a(1), b(999);
  const Vector z = Vector::LinSpaced(5, -1.0, 1.0);
  CHECK(prior_sample(cfg, z, 0.8, a) == prior_sample(cfg, z, 0.8, b));
}

TEST_CASE("SDE prior step is reproducible by seed") {
  const auto cfg = make_cfg(ScheduleFamily::EDM, 100, DiffusionSolver::SDE, unit_gaussian(5));
  Rng a(7), b(7);
  const Vector z = Vector::LinSpaced(5, -1.0, 1.0);
  CHECK(prior_sample(cfg, z, 0.8, a) == prior_sample(cfg, z, 0.8, b));
}

TEST_CASE("rho above the grid is clamped") {
  const auto cfg = make_cfg(ScheduleFamily::EDM, 100, DiffusionSolver::ODE, unit_gaussian(2));
  Rng rng(4);
  PriorStepStats st;
  const Vector out = prior_sample(cfg, Vector::Ones(2), 500.0, rng, &st);
  CHECK(st.clamped);
  CHECK(st.start_index == 0);
  CHECK(st.denoiser_calls == 100);
  CHECK(out.allFinite());
}

TEST_CASE("exact start when the grid is coarse") {
  auto cfg = make_cfg(ScheduleFamily::EDM, 5, DiffusionSolver::ODE, unit_gaussian(1));
  const auto sig = cfg.schedule.sigmas();
  const double rho = 0.5 * (sig[1] + sig[2]);
  REQUIRE(sig[2] < 0.9 * rho);
  Rng rng(5);
  PriorStepStats st;
  prior_sample(cfg, Vector::Ones(1), rho, rng, &st);
  CHECK(st.exact_start);
  CHECK(st.start_index == 2);
  CHECK(st.denoiser_calls == 5 - 2 + 1);

  cfg.snap_ratio = 0.0;
  prior_sample(cfg, Vector::Ones(1), rho, rng, &st);
  CHECK_FALSE(st.exact_start);
  CHECK(st.denoiser_calls == 5 - 2);
}

TEST_CASE("start level matches rho on the grid") {
  Gen g(6);
  const auto cfg = make_cfg(ScheduleFamily::VE, 100, DiffusionSolver::ODE, unit_gaussian(1));
  const auto sig = cfg.schedule.sigmas();
  for (int i = 0; i < 100; ++i) {
    const double rho = g.log_uniform(0.003, 70.0);
    Rng rng(1);
    PriorStepStats st;
    prior_sample(cfg, Vector::Ones(1), rho, rng, &st);
    REQUIRE(sig[st.start_index] <= rho);
    REQUIRE(sig[st.start_index - 1] > rho);
  }
}

TEST_CASE("SDE matches the Gaussian denoising posterior") {
  // Prior N(0,1), rho = 1, z = 2: posterior N(1, 0.5).
  const Index runs = 100000;
  // rho = 1 is off-grid, so start from the exact level. The Euler recursion for the mean
  // lands at 0.9903 on this grid; the bound leaves room for that plus sampling error.
  auto cfg = make_cfg(ScheduleFamily::EDM, 400, DiffusionSolver::SDE, unit_gaussian(runs));
  cfg.snap_ratio = 1.0;
  Rng rng(8);
  const Moments m = moments(prior_sample(cfg, Vector::Constant(runs, 2.0), 1.0, rng));
  CHECK(std::abs(m.mean - 1.0) < 0.017);
  CHECK(std::abs(m.var - 0.5) < 0.03 * 0.5);
}

TEST_CASE("schedule families agree on the denoising posterior mean") {
  // All families share the same noise levels, so a rho on the grid starts every family at the same level.
  // Euler bias on the EDM parametrization is about 2% at N = 400, hence the finer grid.
  const Index runs = 100000;
  const GaussianPrior prior = GaussianPrior::isotropic(Vector::Constant(runs, 0.3), 0.5);
  const double rho = DiffusionSchedule(DiffusionScheduleParams{ScheduleFamily::EDM, 0.002, 80.0, 1600}).sigmas()[1000];
  const double z = -1.0;
  const double expected = 0.3 + 0.5 / (0.5 + rho * rho) * (z - 0.3);
  std::vector<double> means;
  for (auto family : {ScheduleFamily::EDM, ScheduleFamily::VE, ScheduleFamily::VP}) {
    CAPTURE(to_string(family));
    const auto cfg = make_cfg(family, 1600, DiffusionSolver::SDE, std::make_shared<GaussianDenoiser>(prior));
    Rng rng(9);
    const Moments m = moments(prior_sample(cfg, Vector::Constant(runs, z), rho, rng));
    CHECK(std::abs(m.mean - expected) < 0.01 * std::abs(expected));
    const double var = 0.5 * rho * rho / (0.5 + rho * rho);
    CHECK(std::abs(m.var - var) < 0.05 * var);
    means.push_back(m.mean);
  }
  for (double a : means)
    for (double b : means) CHECK(std::abs(a - b) <= 0.01 * std::abs(expected));
}

TEST_CASE("snapping to the exact noise level removes the off-grid bias") {
  const Index runs = 200000;
  const GaussianPrior prior = GaussianPrior::isotropic(Vector::Constant(runs, 0.3), 0.5);
  const double rho = 0.6, z = -1.0;
  const double expected = 0.3 + 0.5 / (0.5 + rho * rho) * (z - 0.3);
  auto cfg = make_cfg(ScheduleFamily::VE, 400, DiffusionSolver::SDE, std::make_shared<GaussianDenoiser>(prior));
  cfg.snap_ratio = 1.0;
  Rng rng(13);
  CHECK(pnpdm::testing::rel_err(moments(prior_sample(cfg, Vector::Constant(runs, z), rho, rng)).mean, expected) < 0.01);
}

TEST_CASE("ODE pushforward matches the denoising posterior mean") {
  const Index runs = 20000;
  Gen g(10);
  const auto cfg = make_cfg(ScheduleFamily::EDM, 400, DiffusionSolver::ODE, unit_gaussian(runs));
  Rng rng(11);
  // With z drawn from its marginal N(0, 1 + rho^2), the ODE output is marginally N(0, 1).
  const Vector z = std::sqrt(1.0 + 0.25) * g.vector(runs);
  const Moments m = moments(prior_sample(cfg, z, 0.5, rng));
  CHECK(std::abs(m.mean) < 0.03);
  CHECK(pnpdm::testing::rel_err(m.var, 1.0) < 0.05);
}

TEST_CASE("exact Gaussian prior step") {
  const Index runs = 100000;
  const ExactGaussianPriorStep step(GaussianPrior::isotropic(Vector::Zero(runs), 1.0));
  Rng rng(12);
  const Moments m = moments(step.sample(Vector::Constant(runs, 2.0), 1.0, rng, nullptr));
  CHECK(pnpdm::testing::rel_err(m.mean, 1.0) < 0.01);
  CHECK(pnpdm::testing::rel_err(m.var, 0.5) < 0.02);
  CHECK(step.name() == "exact-gaussian");
}

TEST_CASE("prior step validation") {
  auto cfg = make_cfg(ScheduleFamily::EDM, 10, DiffusionSolver::SDE, unit_gaussian(2));
  Rng rng(1);
  CHECK_THROWS_AS(prior_sample(cfg, Vector::Ones(2), 0.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(prior_sample(cfg, Vector::Ones(3), 1.0, rng), std::invalid_argument);
  cfg.snap_ratio = 2.0;
  CHECK_THROWS_AS(prior_sample(cfg, Vector::Ones(2), 1.0, rng), std::invalid_argument);
  cfg.denoiser = nullptr;
  CHECK_THROWS_AS(DiffusionPriorStep{cfg}, std::invalid_argument);
  CHECK(parse_diffusion_solver("ODE") == DiffusionSolver::ODE);
  CHECK_THROWS_AS(parse_diffusion_solver("heun"), std::invalid_argument);

  const auto nan = std::make_shared<FunctionDenoiser>(
      1, [](const Vector& v, double) { return Vector::Constant(v.size(), std::nan("")); });
  const auto bad = make_cfg(ScheduleFamily::EDM, 10, DiffusionSolver::ODE, nan);
  CHECK_THROWS_AS(prior_sample(bad, Vector::Ones(1), 1.0, rng), NumericalError);
}
