#include "pnpdm/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace pnpdm {

std::string to_string(InitKind init) {
  switch (init) {
    case InitKind::Zeros: return "zeros";
    case InitKind::StdNormal: return "std_normal";
    case InitKind::Uniform01: return "uniform01";
  }
  return "?";
}

InitKind parse_init_kind(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (lower == "zeros") return InitKind::Zeros;
  if (lower == "std_normal") return InitKind::StdNormal;
  if (lower == "uniform01") return InitKind::Uniform01;
  throw std::invalid_argument("unknown init '" + name + "' (expected zeros, std_normal or uniform01)");
}

void SamplerConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("sampler: iterations must be >= 1");
  if (burn_in < 0 || burn_in >= iterations) throw std::invalid_argument("sampler: burn_in must lie in [0, iterations)");
  if (thin < 1) throw std::invalid_argument("sampler: thin must be >= 1");
  if (chains < 1) throw std::invalid_argument("sampler: chains must be >= 1");
  coupling.validate();
}

Vector initialize(InitKind init, Index n, Rng& rng) {
  switch (init) {
    case InitKind::Zeros: return Vector::Zero(n);
    case InitKind::StdNormal: return standard_normal(n, rng);
    case InitKind::Uniform01: {
      std::uniform_real_distribution<double> uniform(0.0, 1.0);
      Vector out(n);
      for (Index i = 0; i < n; ++i) out[i] = uniform(rng);
      return out;
    }
  }
  throw std::invalid_argument("unknown init kind");
}

std::vector<std::int64_t> sample_iterations(std::int64_t iterations, std::int64_t burn_in, std::int64_t thin) {
  if (thin < 1) throw std::invalid_argument("collect: thin must be >= 1");
  if (burn_in < 0 || burn_in >= iterations) throw std::invalid_argument("collect: empty selection (burn_in >= K)");
  std::vector<std::int64_t> ks;
  const std::int64_t count = (iterations - burn_in) / thin;
  ks.reserve(static_cast<std::size_t>(count));
  for (std::int64_t j = 0; j < count; ++j) ks.push_back(burn_in + j * thin);
  if (ks.empty()) throw std::invalid_argument("collect: empty selection");
  return ks;
}

Matrix collect_samples(const ChainRecord& record, std::int64_t burn_in, std::int64_t thin) {
  const auto iterations = static_cast<std::int64_t>(record.iterates.size());
  if (iterations == 0) throw std::invalid_argument("collect: record holds no iterates (enable keep_iterates)");
  const std::vector<std::int64_t> ks = sample_iterations(iterations, burn_in, thin);
  Matrix out(static_cast<Index>(ks.size()), record.iterates.front().x.size());
  for (std::size_t j = 0; j < ks.size(); ++j) out.row(static_cast<Index>(j)) = record.iterates[ks[j]].x.transpose();
  return out;
}

PnpDmSampler::PnpDmSampler(std::shared_ptr<const LikelihoodStep> likelihood, std::shared_ptr<const PriorStep> prior,
                           SamplerConfig config)
    : likelihood_(std::move(likelihood)), prior_(std::move(prior)), config_(std::move(config)) {
  if (!likelihood_ || !prior_) throw std::invalid_argument("sampler: missing step");
  if (likelihood_->dim() != prior_->dim()) throw std::invalid_argument("sampler: likelihood/prior dimension mismatch");
  config_.validate();
}

ChainRecord PnpDmSampler::run_chain(std::int64_t chain_index) const {
  Rng rng(chain_seed(config_.seed, static_cast<std::uint64_t>(chain_index)));
  Vector x0 = initialize(config_.init, dim(), rng);
  // The init draw comes from its own stream so a supplied x^(0) does not shift the chain.
  return run_chain(chain_index, x0);
}

ChainRecord PnpDmSampler::run_chain(std::int64_t chain_index, const Vector& initial) const {
  if (initial.size() != dim()) throw std::invalid_argument("sampler: initial state dimension mismatch");
  ChainRecord rec;
  rec.chain_index = chain_index;
  rec.seed = chain_seed(config_.seed, static_cast<std::uint64_t>(chain_index));
  rec.initial = initial;
  Rng rng(splitmix64(rec.seed));

  const std::vector<std::int64_t> keep = sample_iterations(config_.iterations, config_.burn_in, config_.thin);
  rec.samples.resize(static_cast<Index>(keep.size()), dim());
  rec.rhos.reserve(static_cast<std::size_t>(config_.iterations));
  if (config_.keep_iterates) rec.iterates.reserve(static_cast<std::size_t>(config_.iterations));

  Vector x = initial;
  std::size_t next = 0;
  PriorStepStats stats;
  for (std::int64_t k = 0; k < config_.iterations; ++k) {
    const double rho = config_.coupling.rho(k);
    rec.rhos.push_back(rho);
    Vector z = likelihood_->sample(x, rho, rng);
    if (!z.allFinite())
      throw NumericalError("chain " + std::to_string(chain_index) + ": non-finite iterate at k=" + std::to_string(k) +
                           " in likelihood step (" + likelihood_->name() + ")");
    x = prior_->sample(z, rho, rng, &stats);
    if (!x.allFinite())
      throw NumericalError("chain " + std::to_string(chain_index) + ": non-finite iterate at k=" + std::to_string(k) +
                           " in prior step (" + prior_->name() + ")");
    rec.prior_identity_steps += stats.identity ? 1 : 0;
    rec.prior_clamped_steps += stats.clamped ? 1 : 0;
    if (next < keep.size() && keep[next] == k) rec.samples.row(static_cast<Index>(next++)) = x.transpose();
    if (config_.keep_iterates) rec.iterates.push_back({k, rho, std::move(z), x});
  }
  rec.final_x = std::move(x);
  return rec;
}

std::vector<ChainRecord> PnpDmSampler::run() const {
  const auto n = static_cast<std::size_t>(config_.chains);
  std::vector<ChainRecord> out(n);
  unsigned workers = config_.threads ? config_.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t c = 0; c < n; ++c) out[c] = run_chain(static_cast<std::int64_t>(c));
    return out;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < n; c = next++) {
          try {
            out[c] = run_chain(static_cast<std::int64_t>(c));
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

Matrix stack_samples(const std::vector<ChainRecord>& records) {
  Index rows = 0;
  Index cols = 0;
  for (const auto& r : records) {
    rows += r.samples.rows();
    cols = r.samples.cols();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (const auto& r : records) {
    out.middleRows(at, r.samples.rows()) = r.samples;
    at += r.samples.rows();
  }
  return out;
}

}  // namespace pnpdm
