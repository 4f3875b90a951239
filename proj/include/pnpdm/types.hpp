#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace pnpdm {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ComplexVector = Eigen::VectorXcd;

// Every chain owns one engine; draws are reproducible for a fixed seed.
using Rng = std::mt19937_64;

/// Image shape in row-major order. Flat vectors index pixel (r, c) at r * cols + c.
struct Shape2 {
  Index rows = 0;
  Index cols = 0;

  Index size() const { return rows * cols; }
  bool operator==(const Shape2&) const = default;
};

// Raised when a chain or a solver produces non-finite values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration; `field` is the dotted path of the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

inline Vector standard_normal(Index n, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector out(n);
  for (Index i = 0; i < n; ++i) out[i] = normal(rng);
  return out;
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

/// SplitMix64 finalizer, used to derive independent per-chain seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t chain_seed(std::uint64_t seed, std::uint64_t chain_index) {
  return seed ^ splitmix64(chain_index);
}

}  // namespace pnpdm
