#pragma once

#include "pnpdm/types.hpp"

#include <limits>
#include <optional>

namespace pnpdm {

// Returned by psnr when the two images are identical.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(peak^2 / MSE).
double psnr(const Vector& a, const Vector& b, double peak = 1.0);

struct MetricsReport {
  Index sample_count = 0;
  double psnr = 0.0;  // of the sample mean against the truth
  Vector mean;
  Vector stddev;  // unbiased (n - 1)
  Vector zscore;  // |mean - truth| / std; +inf where std = 0 and mean != truth
  double outlier_fraction = 0.0;  // fraction of pixels with z > 3
  std::optional<double> data_mismatch;  // f(mean; y), filled in by callers that hold a likelihood
};

/// Per-pixel statistics of a sample set (one row per sample) against a known truth.
MetricsReport coverage_stats(const Matrix& samples, const Vector& truth, double peak = 1.0);

}  // namespace pnpdm
