#include "pnpdm/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace pnpdm {

double psnr(const Vector& a, const Vector& b, double peak) {
  if (a.size() != b.size()) throw std::invalid_argument("psnr: dimension mismatch");
  if (a.size() == 0) throw std::invalid_argument("psnr: empty images");
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
  const double mse = (a - b).squaredNorm() / static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(peak * peak / mse);
}

MetricsReport coverage_stats(const Matrix& samples, const Vector& truth, double peak) {
  if (samples.rows() < 2) throw std::invalid_argument("coverage_stats: need at least 2 samples");
  if (samples.cols() != truth.size()) throw std::invalid_argument("coverage_stats: dimension mismatch");

  MetricsReport r;
  r.sample_count = samples.rows();
  r.mean = samples.colwise().mean().transpose();
  const Matrix centered = samples.rowwise() - r.mean.transpose();
  r.stddev = (centered.colwise().squaredNorm().transpose() / static_cast<double>(samples.rows() - 1)).cwiseSqrt();

  const Index n = truth.size();
  r.zscore.resize(n);
  Index outliers = 0;
  for (Index i = 0; i < n; ++i) {
    const double err = std::abs(r.mean[i] - truth[i]);
    if (r.stddev[i] > 0.0) {
      r.zscore[i] = err / r.stddev[i];
    } else {
      r.zscore[i] = err == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    if (r.zscore[i] > 3.0) ++outliers;
  }
  r.outlier_fraction = static_cast<double>(outliers) / static_cast<double>(n);
  r.psnr = psnr(r.mean, truth, peak);
  return r;
}

}  // namespace pnpdm
