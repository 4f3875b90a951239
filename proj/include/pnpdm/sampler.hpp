#pragma once

#include "pnpdm/likelihood_step.hpp"
#include "pnpdm/prior_step.hpp"
#include "pnpdm/schedules.hpp"
#include "pnpdm/types.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace pnpdm {

enum class InitKind { Zeros, StdNormal, Uniform01 };

std::string to_string(InitKind init);
InitKind parse_init_kind(const std::string& name);

struct SamplerConfig {
  std::int64_t iterations = 100;  // K
  CouplingSchedule coupling;
  InitKind init = InitKind::Zeros;
  std::int64_t burn_in = 40;
  std::int64_t thin = 3;
  std::int64_t chains = 1;
  std::uint64_t seed = 0;
  // Keep every (rho_k, z^(k), x^(k+1)); otherwise only samples and the final iterate.
  bool keep_iterates = false;
  // Worker threads for independent chains; 0 picks the hardware concurrency.
  unsigned threads = 0;

  void validate() const;
};

struct IterateRecord {
  std::int64_t k = 0;
  double rho = 0.0;
  Vector z;  // z^(k), the likelihood-step output
  Vector x;  // x^(k+1), the prior-step output
};

struct ChainRecord {
  std::int64_t chain_index = 0;
  std::uint64_t seed = 0;
  Vector initial;  // x^(0)
  std::vector<IterateRecord> iterates;
  std::vector<double> rhos;
  // One row per retained sample x^(k+1), k = burn_in + j * thin.
  Matrix samples;
  Vector final_x;
  std::int64_t prior_identity_steps = 0;
  std::int64_t prior_clamped_steps = 0;
};

Vector initialize(InitKind init, Index n, Rng& rng);

// Iteration indices k whose outputs x^(k+1) are retained.
std::vector<std::int64_t> sample_iterations(std::int64_t iterations, std::int64_t burn_in, std::int64_t thin);

// Re-extracts a sample set from a record that kept its iterates.
Matrix collect_samples(const ChainRecord& record, std::int64_t burn_in, std::int64_t thin);

/// Split-Gibbs outer loop: for k = 0..K-1,
///   z^(k) <- likelihood step(x^(k), rho_k),  x^(k+1) <- prior step(z^(k), rho_k).
class PnpDmSampler {
 public:
  PnpDmSampler(std::shared_ptr<const LikelihoodStep> likelihood, std::shared_ptr<const PriorStep> prior,
               SamplerConfig config);

  const SamplerConfig& config() const { return config_; }
  Index dim() const { return prior_->dim(); }

  // Deterministic in (seed, chain_index).
  ChainRecord run_chain(std::int64_t chain_index) const;
  ChainRecord run_chain(std::int64_t chain_index, const Vector& initial) const;
  std::vector<ChainRecord> run() const;

 private:
  std::shared_ptr<const LikelihoodStep> likelihood_;
  std::shared_ptr<const PriorStep> prior_;
  SamplerConfig config_;
};

// Stacks the samples of all chains in chain order.
Matrix stack_samples(const std::vector<ChainRecord>& records);

}  // namespace pnpdm
