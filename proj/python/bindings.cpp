#include "pnpdm/config.hpp"
#include "pnpdm/denoisers.hpp"
#include "pnpdm/experiment.hpp"
#include "pnpdm/forward_models.hpp"
#include "pnpdm/likelihood_step.hpp"
#include "pnpdm/metrics.hpp"
#include "pnpdm/npy.hpp"
#include "pnpdm/oracle.hpp"
#include "pnpdm/prior_step.hpp"
#include "pnpdm/schedules.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace pnpdm;

namespace {

Shape2 shape_of(const std::pair<Index, Index>& s) { return {s.first, s.second}; }

ComplexVector mask_arg(const Vector& phases) { return mask_from_phases(phases); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Split-Gibbs posterior sampling with diffusion priors";
  m.attr("__version__") = version();

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<ArrayFormatError>(m, "ArrayFormatError", PyExc_IOError);

  // schedules
  py::class_<CouplingSchedule>(m, "CouplingSchedule")
      .def(py::init([](double rho0, double rho_min, double alpha) {
             CouplingSchedule s{rho0, rho_min, alpha};
             s.validate();
             return s;
           }),
           py::arg("rho0") = 10.0, py::arg("rho_min") = 0.3, py::arg("alpha") = 0.9)
      .def_readonly("rho0", &CouplingSchedule::rho0)
      .def_readonly("rho_min", &CouplingSchedule::rho_min)
      .def_readonly("alpha", &CouplingSchedule::alpha)
      .def("rho", &CouplingSchedule::rho, py::arg("k"));

  m.def("sigma_vp", [](double t) { return sigma_vp(t); }, py::arg("t"));
  m.def("sigma_vp_inverse", [](double s) { return sigma_vp_inverse(s); }, py::arg("sigma"));

  py::class_<DiffusionSchedule>(m, "DiffusionSchedule")
      .def(py::init([](const std::string& family, double sigma_min, double sigma_max, std::size_t steps) {
             DiffusionScheduleParams p;
             p.family = parse_schedule_family(family);
             p.sigma_min = sigma_min;
             p.sigma_max = sigma_max;
             p.steps = steps;
             return DiffusionSchedule(p);
           }),
           py::arg("family") = "edm", py::arg("sigma_min") = 0.002, py::arg("sigma_max") = 80.0,
           py::arg("steps") = 100)
      .def("sigma", &DiffusionSchedule::sigma, py::arg("t"))
      .def("scale", &DiffusionSchedule::scale, py::arg("t"))
      .def("sigma_inverse", &DiffusionSchedule::sigma_inverse, py::arg("sigma"))
      // (scale, sigma, dscale, dsigma)
      .def("eval",
           [](const DiffusionSchedule& s, double t) {
             const ScheduleValues v = s.eval(t);
             return py::make_tuple(v.scale, v.sigma, v.dscale, v.dsigma);
           },
           py::arg("t"))
      .def("times", [](const DiffusionSchedule& s) { return std::vector<double>(s.times().begin(), s.times().end()); })
      .def("sigmas", [](const DiffusionSchedule& s) { return std::vector<double>(s.sigmas().begin(), s.sigmas().end()); })
      .def("start_index", &DiffusionSchedule::start_index, py::arg("rho"));

  // denoisers
  py::class_<GaussianPrior>(m, "GaussianPrior")
      .def(py::init(&GaussianPrior::from_covariance), py::arg("mean"), py::arg("covariance"))
      .def_static("isotropic", &GaussianPrior::isotropic, py::arg("mean"), py::arg("variance"))
      .def_property_readonly("mean", &GaussianPrior::mean)
      .def("covariance", &GaussianPrior::covariance)
      .def("denoise", &GaussianPrior::denoise, py::arg("z"), py::arg("sigma"))
      .def("score", &GaussianPrior::score, py::arg("z"), py::arg("sigma"));

  py::class_<GmmPrior>(m, "GmmPrior")
      .def(py::init([](std::vector<double> weights, const std::vector<Vector>& means, const std::vector<Matrix>& covs) {
             if (means.size() != covs.size()) throw std::invalid_argument("means and covariances differ in length");
             std::vector<GaussianPrior> comps;
             for (std::size_t i = 0; i < means.size(); ++i) comps.push_back(GaussianPrior::from_covariance(means[i], covs[i]));
             return GmmPrior(std::move(weights), std::move(comps));
           }),
           py::arg("weights"), py::arg("means"), py::arg("covariances"))
      .def("denoise", [](const GmmPrior& p, const Vector& z, double s) { return gmm_denoise(p, z, s); }, py::arg("z"),
           py::arg("sigma"))
      .def("score", [](const GmmPrior& p, const Vector& z, double s) { return gmm_score(p, z, s); }, py::arg("z"),
           py::arg("sigma"));

  m.def("vp_precondition", &vp_precondition, py::arg("raw"), py::arg("x"), py::arg("sigma"),
        "raw(x_in, c_noise) -> prediction");

  // forward models
  m.def("circ_conv2d", [](const Vector& x, std::pair<Index, Index> shape, const Matrix& kernel) {
    return circ_conv2d(x, shape_of(shape), kernel);
  }, py::arg("x"), py::arg("shape"), py::arg("kernel"));
  m.def("block_downsample", [](const Vector& x, std::pair<Index, Index> shape, Index f) {
    return block_downsample(x, shape_of(shape), f);
  }, py::arg("x"), py::arg("shape"), py::arg("factor"));
  m.def("cdp_forward", [](const Vector& x, std::pair<Index, Index> shape, const Vector& phases) {
    return cdp_forward(x, shape_of(shape), mask_arg(phases));
  }, py::arg("x"), py::arg("shape"), py::arg("mask_phases"));
  m.def("fpr_forward", [](const Vector& x, std::pair<Index, Index> shape, Index pad) {
    return fpr_forward(x, shape_of(shape), pad);
  }, py::arg("x"), py::arg("shape"), py::arg("pad_factor") = 2);
  m.def("gaussian_kernel", &gaussian_kernel, py::arg("size"), py::arg("std"));

  // sampling steps
  m.def("exact_likelihood_sample",
        [](const Matrix& A, const Vector& y, double sigma_y, const Vector& x, double rho, std::uint64_t seed) {
          LinearGaussianLikelihood lik(std::make_shared<DenseOperator>(A), y, sigma_y);
          Rng rng(seed);
          return exact_gaussian_sample(lik, x, rho, rng);
        },
        py::arg("A"), py::arg("y"), py::arg("sigma_y"), py::arg("x"), py::arg("rho"), py::arg("seed") = 0);
  m.def("gaussian_prior_step",
        [](const GaussianPrior& prior, const Vector& z, double rho, const std::string& family, std::size_t steps,
           const std::string& solver, std::uint64_t seed) {
          PriorStepConfig cfg;
          DiffusionScheduleParams p;
          p.family = parse_schedule_family(family);
          p.steps = steps;
          cfg.schedule = DiffusionSchedule(p);
          cfg.solver = parse_diffusion_solver(solver);
          cfg.denoiser = std::make_shared<GaussianDenoiser>(prior);
          Rng rng(seed);
          return prior_sample(cfg, z, rho, rng);
        },
        py::arg("prior"), py::arg("z"), py::arg("rho"), py::arg("family") = "edm", py::arg("steps") = 100,
        py::arg("solver") = "sde", py::arg("seed") = 0);

  // oracle
  m.def("gaussian_posterior",
        [](const Vector& mean, const Matrix& cov, const Matrix& A, double sigma_y, const Vector& y) {
          const oracle::GaussianPosterior p = oracle::gaussian_posterior(mean, cov, A, sigma_y, y);
          return py::make_tuple(p.mean, p.covariance);
        },
        py::arg("prior_mean"), py::arg("prior_cov"), py::arg("A"), py::arg("sigma_y"), py::arg("y"));

  // cli_io
  m.def("psnr", &psnr, py::arg("a"), py::arg("b"), py::arg("peak") = 1.0);
  py::class_<MetricsReport>(m, "MetricsReport")
      .def_readonly("sample_count", &MetricsReport::sample_count)
      .def_readonly("psnr", &MetricsReport::psnr)
      .def_readonly("mean", &MetricsReport::mean)
      .def_readonly("std", &MetricsReport::stddev)
      .def_readonly("zscore", &MetricsReport::zscore)
      .def_readonly("outlier_fraction", &MetricsReport::outlier_fraction)
      .def_readonly("data_mismatch", &MetricsReport::data_mismatch);
  m.def("coverage_stats", &coverage_stats, py::arg("samples"), py::arg("truth"), py::arg("peak") = 1.0);
  m.def("write_array", [](const std::filesystem::path& p, const Matrix& a) { write_array(p, a); }, py::arg("path"),
        py::arg("array"));
  m.def("read_array",
        [](const std::filesystem::path& p) {
          const NdArray a = read_array(p);
          std::vector<py::ssize_t> shape(a.shape.begin(), a.shape.end());
          py::array_t<double> out(shape);
          std::copy(a.data.begin(), a.data.end(), out.mutable_data());
          return out;
        },
        py::arg("path"));

  m.def("validate_config",
        [](const std::filesystem::path& path, const std::vector<std::string>& overrides) {
          return sha256_hex(canonical_config(load_config(path, overrides)));
        },
        py::arg("path"), py::arg("overrides") = std::vector<std::string>{},
        "Returns the config digest or raises ConfigError.");
  m.def("run",
        [](const std::filesystem::path& config, const std::filesystem::path& out,
           const std::vector<std::string>& overrides) {
          const ExperimentConfig cfg = load_config(config, overrides);
          py::gil_scoped_release release;
          return run_experiment(cfg, out).metrics;
        },
        py::arg("config"), py::arg("out"), py::arg("overrides") = std::vector<std::string>{});
}
