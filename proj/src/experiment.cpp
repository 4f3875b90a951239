#include "pnpdm/experiment.hpp"

#include "pnpdm/npy.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#ifndef PNPDM_VERSION
#define PNPDM_VERSION "0.0.0"
#endif

namespace pnpdm {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

Vector broadcast(const std::vector<double>& values, Index n, const std::string& field) {
  if (values.size() == 1) return Vector::Constant(n, values.front());
  if (static_cast<Index>(values.size()) != n)
    throw ConfigError(field, "expected 1 or " + std::to_string(n) + " values, got " + std::to_string(values.size()));
  return Eigen::Map<const Vector>(values.data(), n);
}

Vector load_vector(const fs::path& path, Index n, const std::string& field) {
  NdArray a;
  try {
    a = read_array(path);
  } catch (const std::exception& e) {
    throw ConfigError(field, e.what());
  }
  if (static_cast<Index>(a.size()) != n)
    throw ConfigError(field, path.string() + " holds " + std::to_string(a.size()) + " values, expected " +
                                 std::to_string(n));
  return to_vector(a);
}

Matrix load_matrix(const fs::path& path, const std::string& field) {
  try {
    const NdArray a = read_array(path);
    if (a.shape.size() != 2) throw std::invalid_argument(path.string() + " is not a 2-D array");
    return to_matrix(a);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(field, e.what());
  }
}

std::shared_ptr<const Denoiser> make_denoiser(const ExperimentConfig& cfg, std::optional<GaussianPrior>& gaussian) {
  const PriorConfig& q = cfg.prior;
  const Index n = cfg.problem.shape().size();
  if (q.kind == PriorKind::Gmm) {
    std::vector<GaussianPrior> comps;
    for (std::size_t i = 0; i < q.weights.size(); ++i)
      comps.push_back(GaussianPrior::isotropic(Vector::Constant(n, q.means[i]), q.variances[i]));
    try {
      return std::make_shared<GmmDenoiser>(GmmPrior(q.weights, std::move(comps)));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("prior.weights", e.what());
    }
  }

  const Vector mean = q.mean_file.empty() ? Vector::Constant(n, q.mean) : load_vector(q.mean_file, n, "prior.mean_file");
  try {
    switch (q.covariance) {
      case CovarianceKind::Isotropic: gaussian = GaussianPrior::isotropic(mean, q.variance); break;
      case CovarianceKind::SquaredExponential: {
        Matrix cov(n, n);
        for (Index i = 0; i < n; ++i)
          for (Index j = 0; j < n; ++j) {
            const double d = static_cast<double>(i - j) / q.length_scale;
            cov(i, j) = q.variance * std::exp(-0.5 * d * d);
          }
        cov.diagonal().array() += kCovarianceJitter * q.variance;
        gaussian = GaussianPrior::from_covariance(mean, cov);
        break;
      }
      case CovarianceKind::File:
        gaussian = GaussianPrior::from_covariance(mean, load_matrix(q.covariance_file, "prior.covariance_file"));
        break;
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError("prior.covariance", e.what());
  }
  return std::make_shared<GaussianDenoiser>(*gaussian);
}

json psnr_json(double v) { return std::isinf(v) ? json("inf") : json(v); }

json metrics_json(const MetricsReport& m) {
  json j;
  j["sample_count"] = m.sample_count;
  j["psnr_db"] = psnr_json(m.psnr);
  j["outlier_fraction"] = m.outlier_fraction;
  j["data_mismatch"] = m.data_mismatch ? json(*m.data_mismatch) : json(nullptr);
  j["mean_file"] = "mean.npy";
  j["std_file"] = "std.npy";
  j["zscore_file"] = "zscore.npy";
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_metrics(const fs::path& dir, const MetricsReport& m) {
  write_array(dir / "mean.npy", m.mean);
  write_array(dir / "std.npy", m.stddev);
  write_array(dir / "zscore.npy", m.zscore);
  write_text(dir / "metrics.json", metrics_json(m).dump(2) + "\n");
}

MetricsReport compute_metrics(const Matrix& samples, const Problem& problem, double peak) {
  MetricsReport m = coverage_stats(samples, problem.truth, peak);
  m.data_mismatch = likelihood_value(*problem.likelihood, m.mean);
  return m;
}

std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

std::string chain_file(std::size_t i) { return "samples_chain" + std::to_string(i) + ".npy"; }

}  // namespace

std::string version() { return PNPDM_VERSION; }

Problem build_problem(const ExperimentConfig& cfg) {
  const ProblemConfig& p = cfg.problem;
  Problem out;
  out.shape = p.shape();
  const Index n = out.shape.size();
  Rng rng(splitmix64(p.seed));

  std::optional<GaussianPrior> gaussian;
  const auto denoiser = make_denoiser(cfg, gaussian);
  if (cfg.prior.solver == PriorSolver::ExactGaussian) {
    out.prior_step = std::make_shared<ExactGaussianPriorStep>(*gaussian);
  } else {
    PriorStepConfig pc;
    pc.schedule = DiffusionSchedule(cfg.schedule);
    pc.solver = cfg.prior.solver == PriorSolver::Sde ? DiffusionSolver::SDE : DiffusionSolver::ODE;
    pc.denoiser = denoiser;
    pc.snap_ratio = cfg.prior.snap_ratio;
    out.prior_step = std::make_shared<DiffusionPriorStep>(std::move(pc));
  }

  // Forward model first so its randomness does not depend on how the truth is supplied.
  std::shared_ptr<const LinearOperator> op;
  std::optional<MagnitudeModel> magnitude;
  switch (p.kind) {
    case ProblemKind::Linear:
      switch (p.op) {
        case OperatorKind::Identity: op = std::make_shared<BlockAverage>(out.shape, 1); break;
        case OperatorKind::DenseGaussian: {
          const Index m = p.measurements > 0 ? p.measurements : n / 2;
          Matrix a(m, n);
          std::normal_distribution<double> normal(0.0, 1.0);
          for (Index i = 0; i < m; ++i)
            for (Index j = 0; j < n; ++j) a(i, j) = normal(rng);
          out.operator_matrix = a;
          op = std::make_shared<DenseOperator>(std::move(a));
          break;
        }
        case OperatorKind::Dense: {
          Matrix a = load_matrix(p.operator_file, "problem.operator_file");
          if (a.cols() != n) throw ConfigError("problem.operator_file", "operator must have rows*cols columns");
          out.operator_matrix = a;
          op = std::make_shared<DenseOperator>(std::move(a));
          break;
        }
        case OperatorKind::Convolution:
          out.kernel = gaussian_kernel(p.kernel_size, p.kernel_std);
          op = std::make_shared<CircularConvolution>(out.shape, *out.kernel);
          break;
        case OperatorKind::BlockAverage: op = std::make_shared<BlockAverage>(out.shape, p.factor); break;
      }
      break;
    case ProblemKind::Cdp:
      out.mask_phases =
          p.mask_file.empty() ? random_mask_phases(n, rng) : load_vector(p.mask_file, n, "problem.mask_file");
      magnitude = MagnitudeModel::cdp(out.shape, mask_from_phases(*out.mask_phases));
      break;
    case ProblemKind::Fpr: magnitude = MagnitudeModel::fpr(out.shape, p.pad_factor); break;
  }

  if (!p.truth_file.empty()) {
    out.truth = load_vector(p.truth_file, n, "problem.truth_file");
  } else if (!p.truth.empty()) {
    out.truth = broadcast(p.truth, n, "problem.truth");
  } else if (gaussian) {
    out.truth = gaussian->sample(rng);
  } else {
    out.truth = std::static_pointer_cast<const GmmDenoiser>(denoiser)->prior().sample(rng);
  }

  const Index m = op ? op->output_size() : magnitude->output_shape().size();
  if (!p.measurement_file.empty()) {
    out.measurement = load_vector(p.measurement_file, m, "problem.measurement_file");
  } else if (!p.measurement.empty()) {
    out.measurement = broadcast(p.measurement, m, "problem.measurement");
  } else {
    const Vector clean = op ? op->apply(out.truth) : magnitude->forward(out.truth);
    out.measurement = clean + p.noise_std * standard_normal(m, rng);
  }

  if (op) {
    out.likelihood = std::make_shared<LinearGaussianLikelihood>(op, out.measurement, p.noise_std);
  } else {
    out.likelihood = std::make_shared<MagnitudeLikelihood>(*magnitude, out.measurement, p.noise_std);
  }
  try {
    out.likelihood_step = make_likelihood_step(out.likelihood, cfg.likelihood, cfg.lmc);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("likelihood.method", e.what());
  }
  return out;
}

RunResult run_experiment(const ExperimentConfig& cfg, const fs::path& out_dir) {
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  const Problem problem = build_problem(cfg);
  fs::create_directories(out_dir);

  const PnpDmSampler sampler(problem.likelihood_step, problem.prior_step, cfg.sampler);
  RunResult result;
  result.chains = sampler.run();

  // Each chain owns its file; everything shared is written after all chains joined.
  for (std::size_t i = 0; i < result.chains.size(); ++i) {
    const ChainRecord& rec = result.chains[i];
    write_array(out_dir / chain_file(i), rec.samples);
    if (cfg.save_iterates) {
      Matrix zs(static_cast<Index>(rec.iterates.size()), sampler.dim());
      Matrix xs(zs.rows(), zs.cols());
      for (std::size_t k = 0; k < rec.iterates.size(); ++k) {
        zs.row(static_cast<Index>(k)) = rec.iterates[k].z.transpose();
        xs.row(static_cast<Index>(k)) = rec.iterates[k].x.transpose();
      }
      write_array(out_dir / ("iterates_z_chain" + std::to_string(i) + ".npy"), zs);
      write_array(out_dir / ("iterates_x_chain" + std::to_string(i) + ".npy"), xs);
    }
  }
  const std::vector<double>& rhos = result.chains.front().rhos;
  write_array(out_dir / "rho_trace.npy", Vector(Eigen::Map<const Vector>(rhos.data(), static_cast<Index>(rhos.size()))));
  write_array(out_dir / "truth.npy", problem.truth);
  write_array(out_dir / "measurement.npy", problem.measurement);
  if (problem.mask_phases) write_array(out_dir / "mask_phases.npy", *problem.mask_phases);
  if (problem.kernel) write_array(out_dir / "kernel.npy", *problem.kernel);
  if (problem.operator_matrix) write_array(out_dir / "operator.npy", *problem.operator_matrix);

  result.metrics = compute_metrics(stack_samples(result.chains), problem, cfg.peak);
  write_metrics(out_dir, result.metrics);

  const std::string canonical = canonical_config(cfg);
  write_text(out_dir / "config.ini", canonical);

  json manifest;
  manifest["software"] = {{"name", "pnpdm"}, {"version", version()}};
  manifest["config_file"] = "config.ini";
  manifest["config_sha256"] = sha256_hex(canonical);
  manifest["seed"] = cfg.sampler.seed;
  manifest["problem_seed"] = cfg.problem.seed;
  json chains = json::array();
  for (std::size_t i = 0; i < result.chains.size(); ++i) {
    const ChainRecord& rec = result.chains[i];
    chains.push_back({{"index", rec.chain_index},
                      {"seed", rec.seed},
                      {"samples_file", chain_file(i)},
                      {"sample_count", rec.samples.rows()},
                      {"prior_identity_steps", rec.prior_identity_steps},
                      {"prior_clamped_steps", rec.prior_clamped_steps}});
  }
  manifest["chains"] = chains;
  manifest["schedule"] = {{"family", to_string(cfg.schedule.family)},
                          {"sigma_min", cfg.schedule.sigma_min},
                          {"sigma_max", cfg.schedule.sigma_max},
                          {"steps", cfg.schedule.steps},
                          {"grid_exponent", cfg.schedule.grid_exponent},
                          {"beta_d", cfg.schedule.beta_d},
                          {"beta_min", cfg.schedule.beta_min},
                          {"solver", to_string(cfg.prior.solver)},
                          {"snap_ratio", cfg.prior.snap_ratio}};
  manifest["coupling"] = {{"rho0", cfg.sampler.coupling.rho0},
                          {"rho_min", cfg.sampler.coupling.rho_min},
                          {"alpha", cfg.sampler.coupling.alpha}};
  manifest["likelihood_step"] = problem.likelihood_step->name();
  manifest["prior_step"] = problem.prior_step->name();
  manifest["rho_trace"] = rhos;
  manifest["rho_trace_file"] = "rho_trace.npy";
  json files = {{"truth", "truth.npy"}, {"measurement", "measurement.npy"}, {"metrics", "metrics.json"}};
  if (problem.mask_phases) files["mask_phases"] = "mask_phases.npy";
  if (problem.kernel) files["kernel"] = "kernel.npy";
  if (problem.operator_matrix) files["operator"] = "operator.npy";
  manifest["files"] = files;
  manifest["psnr_peak"] = cfg.peak;
  manifest["started_utc"] = utc_timestamp(started);
  manifest["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  result.manifest_path = out_dir / "manifest.json";
  write_text(result.manifest_path, manifest.dump(2) + "\n");
  return result;
}

int run_experiment(const fs::path& config_path, const fs::path& out_dir, const std::vector<std::string>& overrides,
                   std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path, overrides);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    run_experiment(cfg, out_dir);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "run aborted: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

MetricsReport recompute_metrics(const fs::path& run_dir) {
  const ExperimentConfig cfg = load_config(run_dir / "config.ini");
  const Problem problem = build_problem(cfg);
  std::vector<Matrix> parts;
  Index rows = 0;
  for (std::size_t i = 0; fs::exists(run_dir / chain_file(i)); ++i) {
    parts.push_back(to_matrix(read_array(run_dir / chain_file(i))));
    if (parts.back().cols() != problem.shape.size())
      throw std::runtime_error(chain_file(i) + " does not match the problem dimension");
    rows += parts.back().rows();
  }
  if (parts.empty()) throw std::runtime_error("no sample arrays in " + run_dir.string());
  Matrix samples(rows, problem.shape.size());
  Index at = 0;
  for (const Matrix& part : parts) {
    samples.middleRows(at, part.rows()) = part;
    at += part.rows();
  }
  const MetricsReport m = compute_metrics(samples, problem, cfg.peak);
  write_metrics(run_dir, m);
  return m;
}

}  // namespace pnpdm
