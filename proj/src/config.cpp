#include "pnpdm/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace pnpdm {
namespace {

namespace pt = boost::property_tree;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

template <class E>
E parse_enum(const std::string& field, const std::string& value, const std::map<std::string, E>& table) {
  const auto it = table.find(lower(value));
  if (it != table.end()) return it->second;
  std::string names;
  for (const auto& [k, v] : table) names += (names.empty() ? "" : ", ") + k;
  throw ConfigError(field, "unknown value '" + value + "' (expected one of " + names + ")");
}

const std::map<std::string, ProblemKind> kProblemKinds{
    {"linear", ProblemKind::Linear}, {"cdp", ProblemKind::Cdp}, {"fpr", ProblemKind::Fpr}};
const std::map<std::string, OperatorKind> kOperatorKinds{{"identity", OperatorKind::Identity},
                                                         {"dense_gaussian", OperatorKind::DenseGaussian},
                                                         {"dense", OperatorKind::Dense},
                                                         {"convolution", OperatorKind::Convolution},
                                                         {"block_average", OperatorKind::BlockAverage}};
const std::map<std::string, PriorKind> kPriorKinds{{"gaussian", PriorKind::Gaussian}, {"gmm", PriorKind::Gmm}};
const std::map<std::string, CovarianceKind> kCovarianceKinds{{"isotropic", CovarianceKind::Isotropic},
                                                             {"squared_exponential", CovarianceKind::SquaredExponential},
                                                             {"file", CovarianceKind::File}};
const std::map<std::string, PriorSolver> kSolvers{
    {"sde", PriorSolver::Sde}, {"ode", PriorSolver::Ode}, {"exact_gaussian", PriorSolver::ExactGaussian}};
const std::map<std::string, ScheduleFamily> kFamilies{
    {"edm", ScheduleFamily::EDM}, {"ve", ScheduleFamily::VE}, {"vp", ScheduleFamily::VP}};
const std::map<std::string, LikelihoodMethod> kMethods{
    {"auto", LikelihoodMethod::Auto}, {"exact", LikelihoodMethod::Exact}, {"lmc", LikelihoodMethod::Lmc}};
const std::map<std::string, InitKind> kInits{
    {"zeros", InitKind::Zeros}, {"std_normal", InitKind::StdNormal}, {"uniform01", InitKind::Uniform01}};

template <class E>
std::string enum_name(E value, const std::map<std::string, E>& table) {
  for (const auto& [k, v] : table)
    if (v == value) return k;
  return "?";
}

const std::map<std::string, std::set<std::string>> kSchema{
    {"problem",
     {"kind", "operator", "rows", "cols", "measurements", "kernel_size", "kernel_std", "factor", "pad_factor",
      "noise_std", "seed", "truth", "measurement", "truth_file", "measurement_file", "operator_file", "mask_file"}},
    {"prior",
     {"kind", "covariance", "mean", "variance", "length_scale", "mean_file", "covariance_file", "weights", "means",
      "variances", "solver", "snap_ratio"}},
    {"schedule", {"family", "sigma_min", "sigma_max", "steps", "grid_exponent", "beta_d", "beta_min"}},
    {"coupling", {"rho0", "rho_min", "alpha"}},
    {"likelihood", {"method", "step_size", "iterations"}},
    {"sampler", {"iterations", "burn_in", "thin", "chains", "seed", "init", "threads"}},
    {"io", {"peak", "save_iterates"}},
};

// Typed access to a validated tree; every lookup names its "section.key".
class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {}

  std::optional<std::string> raw(const std::string& field) const {
    if (auto v = tree_.get_optional<std::string>(pt::ptree::path_type(field, '.'))) return trim(*v);
    return std::nullopt;
  }

  std::string str(const std::string& field, const std::string& fallback) const { return raw(field).value_or(fallback); }

  double real(const std::string& field, double fallback) const {
    const auto v = raw(field);
    return v ? to_double(field, *v) : fallback;
  }

  std::int64_t integer(const std::string& field, std::int64_t fallback) const {
    const auto v = raw(field);
    if (!v) return fallback;
    std::size_t used = 0;
    try {
      const long long out = std::stoll(*v, &used);
      if (used == v->size()) return out;
    } catch (const std::exception&) {
    }
    throw ConfigError(field, "expected an integer, got '" + *v + "'");
  }

  std::uint64_t unsigned_integer(const std::string& field, std::uint64_t fallback) const {
    const auto v = raw(field);
    if (!v) return fallback;
    std::size_t used = 0;
    try {
      if (!v->empty() && (*v)[0] != '-') {
        const unsigned long long out = std::stoull(*v, &used);
        if (used == v->size()) return out;
      }
    } catch (const std::exception&) {
    }
    throw ConfigError(field, "expected a non-negative integer, got '" + *v + "'");
  }

  bool boolean(const std::string& field, bool fallback) const {
    const auto v = raw(field);
    if (!v) return fallback;
    const std::string s = lower(*v);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError(field, "expected a boolean, got '" + *v + "'");
  }

  std::vector<double> list(const std::string& field) const {
    std::vector<double> out;
    const auto v = raw(field);
    if (!v || v->empty()) return out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(field, trim(item)));
    return out;
  }

 private:
  static double to_double(const std::string& field, const std::string& v) {
    std::size_t used = 0;
    try {
      const double out = std::stod(v, &used);
      if (used == v.size() && std::isfinite(out)) return out;
    } catch (const std::exception&) {
    }
    throw ConfigError(field, "expected a finite number, got '" + v + "'");
  }

  const pt::ptree& tree_;
};

void check_schema(const pt::ptree& tree) {
  for (const auto& [section, body] : tree) {
    const auto it = kSchema.find(section);
    if (it == kSchema.end()) throw ConfigError(section, "unknown section");
    if (!body.data().empty() && body.empty()) throw ConfigError(section, "key outside any section");
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) throw ConfigError(section + "." + key, "unknown key");
      if (!value.empty()) throw ConfigError(section + "." + key, "unexpected nesting");
    }
  }
}

void apply_override(pt::ptree& tree, const std::string& item) {
  const auto eq = item.find('=');
  if (eq == std::string::npos) throw ConfigError(item, "override must look like section.key=value");
  const std::string field = trim(item.substr(0, eq));
  const auto dot = field.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == field.size() || field.find('.', dot + 1) != std::string::npos)
    throw ConfigError(field, "override key must look like section.key");
  tree.put(pt::ptree::path_type(field, '.'), trim(item.substr(eq + 1)));
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  if (value.empty()) return {};
  std::filesystem::path p(value);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

template <class Fn>
void rethrow_as_config(const std::string& field, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(field, e.what());
  }
}

void validate(const ExperimentConfig& c) {
  const ProblemConfig& p = c.problem;
  if (p.rows < 1) throw ConfigError("problem.rows", "must be >= 1");
  if (p.cols < 1) throw ConfigError("problem.cols", "must be >= 1");
  if (!(p.noise_std > 0.0)) throw ConfigError("problem.noise_std", "must be positive");
  const Index n = p.rows * p.cols;
  if (!p.truth.empty() && p.truth.size() != 1 && static_cast<Index>(p.truth.size()) != n)
    throw ConfigError("problem.truth", "needs 1 or rows*cols values");
  if (p.kind == ProblemKind::Linear) {
    switch (p.op) {
      case OperatorKind::DenseGaussian:
        if (p.measurements < 0) throw ConfigError("problem.measurements", "must be >= 0");
        if (n < 2 && p.measurements == 0) throw ConfigError("problem.measurements", "required when rows*cols < 2");
        break;
      case OperatorKind::Dense:
        if (p.operator_file.empty()) throw ConfigError("problem.operator_file", "required for operator = dense");
        break;
      case OperatorKind::Convolution:
        if (p.kernel_size < 1 || p.kernel_size % 2 == 0) throw ConfigError("problem.kernel_size", "must be odd");
        if (p.kernel_size > std::min(p.rows, p.cols)) throw ConfigError("problem.kernel_size", "exceeds image size");
        if (!(p.kernel_std > 0.0)) throw ConfigError("problem.kernel_std", "must be positive");
        break;
      case OperatorKind::BlockAverage:
        if (p.factor < 1 || p.rows % p.factor != 0 || p.cols % p.factor != 0)
          throw ConfigError("problem.factor", "must divide rows and cols");
        break;
      case OperatorKind::Identity: break;
    }
  } else {
    if (c.likelihood == LikelihoodMethod::Exact)
      throw ConfigError("likelihood.method", "exact sampling needs a linear problem");
    if (p.kind == ProblemKind::Fpr && p.pad_factor < 1) throw ConfigError("problem.pad_factor", "must be >= 1");
  }

  const PriorConfig& q = c.prior;
  if (q.kind == PriorKind::Gaussian) {
    if (q.covariance != CovarianceKind::File && !(q.variance > 0.0))
      throw ConfigError("prior.variance", "must be positive");
    if (q.covariance == CovarianceKind::SquaredExponential && !(q.length_scale > 0.0))
      throw ConfigError("prior.length_scale", "must be positive");
    if (q.covariance == CovarianceKind::File && q.covariance_file.empty())
      throw ConfigError("prior.covariance_file", "required for covariance = file");
  } else {
    if (q.weights.empty()) throw ConfigError("prior.weights", "required for a gmm prior");
    if (q.means.size() != q.weights.size()) throw ConfigError("prior.means", "needs one value per weight");
    if (q.variances.size() != q.weights.size()) throw ConfigError("prior.variances", "needs one value per weight");
    for (double w : q.weights)
      if (w < 0.0) throw ConfigError("prior.weights", "must be non-negative");
    double total = 0.0;
    for (double w : q.weights) total += w;
    if (std::abs(total - 1.0) > 1e-12) throw ConfigError("prior.weights", "must sum to 1");
    for (double v : q.variances)
      if (!(v > 0.0)) throw ConfigError("prior.variances", "must be positive");
    if (q.solver == PriorSolver::ExactGaussian)
      throw ConfigError("prior.solver", "exact_gaussian requires a gaussian prior");
  }
  if (!(q.snap_ratio >= 0.0 && q.snap_ratio <= 1.0)) throw ConfigError("prior.snap_ratio", "must lie in [0, 1]");

  rethrow_as_config("schedule", [&] { DiffusionSchedule check(c.schedule); });
  rethrow_as_config("coupling", [&] { c.sampler.coupling.validate(); });
  rethrow_as_config("likelihood", [&] { c.lmc.validate(); });
  const SamplerConfig& sc = c.sampler;
  if (sc.iterations < 1) throw ConfigError("sampler.iterations", "must be >= 1");
  if (sc.burn_in < 0 || sc.burn_in >= sc.iterations) throw ConfigError("sampler.burn_in", "must lie in [0, iterations)");
  if (sc.thin < 1) throw ConfigError("sampler.thin", "must be >= 1");
  if (sc.chains < 1) throw ConfigError("sampler.chains", "must be >= 1");
  rethrow_as_config("sampler", [&] { sc.validate(); });
  if (!(c.peak > 0.0)) throw ConfigError("io.peak", "must be positive");
}

}  // namespace

std::string to_string(ProblemKind kind) { return enum_name(kind, kProblemKinds); }
std::string to_string(OperatorKind kind) { return enum_name(kind, kOperatorKinds); }
std::string to_string(PriorKind kind) { return enum_name(kind, kPriorKinds); }
std::string to_string(CovarianceKind kind) { return enum_name(kind, kCovarianceKinds); }
std::string to_string(PriorSolver solver) { return enum_name(solver, kSolvers); }

ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides,
                              const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("", std::string("malformed config: ") + e.what());
  }
  for (const auto& o : overrides) apply_override(tree, o);
  check_schema(tree);
  const Reader r(tree);

  ExperimentConfig c;
  c.base_dir = base_dir;
  ProblemConfig& p = c.problem;
  p.kind = parse_enum("problem.kind", r.str("problem.kind", "linear"), kProblemKinds);
  p.op = parse_enum("problem.operator", r.str("problem.operator", "dense_gaussian"), kOperatorKinds);
  p.rows = r.integer("problem.rows", p.rows);
  p.cols = r.integer("problem.cols", p.cols);
  p.measurements = r.integer("problem.measurements", p.measurements);
  p.kernel_size = r.integer("problem.kernel_size", p.kernel_size);
  p.kernel_std = r.real("problem.kernel_std", p.kernel_std);
  p.factor = r.integer("problem.factor", p.factor);
  p.pad_factor = r.integer("problem.pad_factor", p.pad_factor);
  p.noise_std = r.real("problem.noise_std", p.noise_std);
  p.seed = r.unsigned_integer("problem.seed", p.seed);
  p.truth = r.list("problem.truth");
  p.measurement = r.list("problem.measurement");
  p.truth_file = resolve(base_dir, r.str("problem.truth_file", ""));
  p.measurement_file = resolve(base_dir, r.str("problem.measurement_file", ""));
  p.operator_file = resolve(base_dir, r.str("problem.operator_file", ""));
  p.mask_file = resolve(base_dir, r.str("problem.mask_file", ""));

  PriorConfig& q = c.prior;
  q.kind = parse_enum("prior.kind", r.str("prior.kind", "gaussian"), kPriorKinds);
  q.covariance = parse_enum("prior.covariance", r.str("prior.covariance", "isotropic"), kCovarianceKinds);
  q.mean = r.real("prior.mean", q.mean);
  q.variance = r.real("prior.variance", q.variance);
  q.length_scale = r.real("prior.length_scale", q.length_scale);
  q.mean_file = resolve(base_dir, r.str("prior.mean_file", ""));
  q.covariance_file = resolve(base_dir, r.str("prior.covariance_file", ""));
  q.weights = r.list("prior.weights");
  q.means = r.list("prior.means");
  q.variances = r.list("prior.variances");
  q.solver = parse_enum("prior.solver", r.str("prior.solver", "sde"), kSolvers);
  q.snap_ratio = r.real("prior.snap_ratio", q.snap_ratio);

  DiffusionScheduleParams& s = c.schedule;
  s.family = parse_enum("schedule.family", r.str("schedule.family", "edm"), kFamilies);
  s.sigma_min = r.real("schedule.sigma_min", s.sigma_min);
  s.sigma_max = r.real("schedule.sigma_max", s.sigma_max);
  const std::int64_t steps = r.integer("schedule.steps", static_cast<std::int64_t>(s.steps));
  if (steps < 2) throw ConfigError("schedule.steps", "must be >= 2");
  s.steps = static_cast<std::size_t>(steps);
  s.grid_exponent = r.real("schedule.grid_exponent", s.grid_exponent);
  s.beta_d = r.real("schedule.beta_d", s.beta_d);
  s.beta_min = r.real("schedule.beta_min", s.beta_min);

  CouplingSchedule& k = c.sampler.coupling;
  k.rho0 = r.real("coupling.rho0", k.rho0);
  k.rho_min = r.real("coupling.rho_min", k.rho_min);
  k.alpha = r.real("coupling.alpha", k.alpha);

  c.likelihood = parse_enum("likelihood.method", r.str("likelihood.method", "auto"), kMethods);
  c.lmc.step_size = r.real("likelihood.step_size", c.lmc.step_size);
  const std::int64_t lmc_iters = r.integer("likelihood.iterations", c.lmc.iterations);
  if (lmc_iters < 1 || lmc_iters > std::numeric_limits<int>::max())
    throw ConfigError("likelihood.iterations", "must be a positive int");
  c.lmc.iterations = static_cast<int>(lmc_iters);

  SamplerConfig& sm = c.sampler;
  sm.iterations = r.integer("sampler.iterations", sm.iterations);
  sm.burn_in = r.integer("sampler.burn_in", sm.burn_in);
  sm.thin = r.integer("sampler.thin", sm.thin);
  sm.chains = r.integer("sampler.chains", sm.chains);
  sm.seed = r.unsigned_integer("sampler.seed", sm.seed);
  sm.init = parse_enum("sampler.init", r.str("sampler.init", "zeros"), kInits);
  const std::int64_t threads = r.integer("sampler.threads", 0);
  if (threads < 0 || threads > 4096) throw ConfigError("sampler.threads", "must lie in [0, 4096]");
  sm.threads = static_cast<unsigned>(threads);

  c.peak = r.real("io.peak", c.peak);
  c.save_iterates = r.boolean("io.save_iterates", c.save_iterates);
  sm.keep_iterates = c.save_iterates;

  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), overrides, std::filesystem::absolute(path).parent_path());
}

std::string canonical_config(const ExperimentConfig& c) {
  auto join = [](const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
    return out;
  };
  auto path = [](const std::filesystem::path& p) { return p.empty() ? std::string() : std::filesystem::absolute(p).string(); };

  std::ostringstream os;
  const ProblemConfig& p = c.problem;
  os << "[problem]\n"
     << "kind = " << to_string(p.kind) << "\noperator = " << to_string(p.op) << "\nrows = " << p.rows
     << "\ncols = " << p.cols << "\nmeasurements = " << p.measurements << "\nkernel_size = " << p.kernel_size
     << "\nkernel_std = " << format_double(p.kernel_std) << "\nfactor = " << p.factor
     << "\npad_factor = " << p.pad_factor << "\nnoise_std = " << format_double(p.noise_std) << "\nseed = " << p.seed
     << "\ntruth = " << join(p.truth) << "\nmeasurement = " << join(p.measurement)
     << "\ntruth_file = " << path(p.truth_file) << "\nmeasurement_file = " << path(p.measurement_file)
     << "\noperator_file = " << path(p.operator_file) << "\nmask_file = " << path(p.mask_file) << "\n\n";
  const PriorConfig& q = c.prior;
  os << "[prior]\n"
     << "kind = " << to_string(q.kind) << "\ncovariance = " << to_string(q.covariance)
     << "\nmean = " << format_double(q.mean) << "\nvariance = " << format_double(q.variance)
     << "\nlength_scale = " << format_double(q.length_scale) << "\nmean_file = " << path(q.mean_file)
     << "\ncovariance_file = " << path(q.covariance_file) << "\nweights = " << join(q.weights)
     << "\nmeans = " << join(q.means) << "\nvariances = " << join(q.variances) << "\nsolver = " << to_string(q.solver)
     << "\nsnap_ratio = " << format_double(q.snap_ratio) << "\n\n";
  const DiffusionScheduleParams& s = c.schedule;
  os << "[schedule]\n"
     << "family = " << lower(to_string(s.family)) << "\nsigma_min = " << format_double(s.sigma_min)
     << "\nsigma_max = " << format_double(s.sigma_max) << "\nsteps = " << s.steps
     << "\ngrid_exponent = " << format_double(s.grid_exponent) << "\nbeta_d = " << format_double(s.beta_d)
     << "\nbeta_min = " << format_double(s.beta_min) << "\n\n";
  const CouplingSchedule& k = c.sampler.coupling;
  os << "[coupling]\n"
     << "rho0 = " << format_double(k.rho0) << "\nrho_min = " << format_double(k.rho_min)
     << "\nalpha = " << format_double(k.alpha) << "\n\n";
  os << "[likelihood]\n"
     << "method = " << enum_name(c.likelihood, kMethods) << "\nstep_size = " << format_double(c.lmc.step_size)
     << "\niterations = " << c.lmc.iterations << "\n\n";
  const SamplerConfig& sm = c.sampler;
  os << "[sampler]\n"
     << "iterations = " << sm.iterations << "\nburn_in = " << sm.burn_in << "\nthin = " << sm.thin
     << "\nchains = " << sm.chains << "\nseed = " << sm.seed << "\ninit = " << to_string(sm.init)
     << "\nthreads = " << sm.threads << "\n\n";
  os << "[io]\n"
     << "peak = " << format_double(c.peak) << "\nsave_iterates = " << (c.save_iterates ? "true" : "false") << "\n";
  return os.str();
}

std::string sha256_hex(const std::string& text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256: digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return os.str();
}

}  // namespace pnpdm
