#include "pnpdm/forward_models.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pnpdm {

Vector LinearOperator::apply_gram_function(const Vector&, const std::function<double(double)>&) const {
  throw std::logic_error("linear operator has no spectral structure");
}

Vector LinearOperator::gram_eigenvalues() const {
  throw std::logic_error("linear operator has no spectral structure");
}

// ---------------------------------------------------------------------------
// Dense

DenseOperator::DenseOperator(Matrix matrix) : matrix_(std::move(matrix)) {
  if (matrix_.rows() == 0 || matrix_.cols() == 0) throw std::invalid_argument("dense operator: empty matrix");
  if (!matrix_.allFinite()) throw std::invalid_argument("dense operator: non-finite entries");
  const Index n = matrix_.cols();
  if (n > kMaxSpectralDim) return;
  Eigen::JacobiSVD<Matrix> svd(matrix_, Eigen::ComputeFullV);
  basis_ = svd.matrixV();
  gram_ = Vector::Zero(n);
  const Vector& s = svd.singularValues();
  for (Index i = 0; i < s.size(); ++i) gram_[i] = s[i] * s[i];
}

Vector DenseOperator::apply(const Vector& x) const {
  if (x.size() != input_size()) throw std::invalid_argument("dense operator: input size mismatch");
  return matrix_ * x;
}

Vector DenseOperator::adjoint(const Vector& y) const {
  if (y.size() != output_size()) throw std::invalid_argument("dense operator: output size mismatch");
  return matrix_.transpose() * y;
}

Vector DenseOperator::apply_gram_function(const Vector& x, const std::function<double(double)>& g) const {
  if (!has_spectral()) return LinearOperator::apply_gram_function(x, g);
  if (x.size() != input_size()) throw std::invalid_argument("dense operator: input size mismatch");
  const Vector gains = gram_.unaryExpr(g);
  return basis_ * gains.cwiseProduct(basis_.transpose() * x);
}

Vector DenseOperator::gram_eigenvalues() const {
  if (!has_spectral()) return LinearOperator::gram_eigenvalues();
  return gram_;
}

// ---------------------------------------------------------------------------
// Circular convolution

CircularConvolution::CircularConvolution(Shape2 shape, const Matrix& kernel)
    : shape_(shape), fft_(std::make_shared<UnitaryFft2>(shape)) {
  if (kernel.rows() > shape.rows || kernel.cols() > shape.cols || kernel.size() == 0)
    throw std::invalid_argument("circular convolution: kernel must be non-empty and no larger than the image");
  const Index ch = kernel.rows() / 2;
  const Index cw = kernel.cols() / 2;
  ComplexVector shifted = ComplexVector::Zero(shape.size());
  for (Index a = 0; a < kernel.rows(); ++a) {
    for (Index b = 0; b < kernel.cols(); ++b) {
      const Index r = ((a - ch) % shape.rows + shape.rows) % shape.rows;
      const Index c = ((b - cw) % shape.cols + shape.cols) % shape.cols;
      shifted[r * shape.cols + c] += kernel(a, b);
    }
  }
  eigenvalues_ = fft_->forward(shifted) * std::sqrt(static_cast<double>(shape.size()));
}

Vector CircularConvolution::apply(const Vector& x) const {
  if (x.size() != input_size()) throw std::invalid_argument("circular convolution: size mismatch");
  const ComplexVector spec = fft_->forward(x.cast<std::complex<double>>());
  return fft_->inverse(eigenvalues_.cwiseProduct(spec)).real();
}

Vector CircularConvolution::adjoint(const Vector& y) const {
  if (y.size() != output_size()) throw std::invalid_argument("circular convolution: size mismatch");
  const ComplexVector spec = fft_->forward(y.cast<std::complex<double>>());
  return fft_->inverse(eigenvalues_.conjugate().cwiseProduct(spec)).real();
}

Vector CircularConvolution::apply_gram_function(const Vector& x, const std::function<double(double)>& g) const {
  if (x.size() != input_size()) throw std::invalid_argument("circular convolution: size mismatch");
  ComplexVector spec = fft_->forward(x.cast<std::complex<double>>());
  for (Index k = 0; k < spec.size(); ++k) spec[k] *= g(std::norm(eigenvalues_[k]));
  return fft_->inverse(spec).real();
}

Vector CircularConvolution::gram_eigenvalues() const { return eigenvalues_.cwiseAbs2(); }

// ---------------------------------------------------------------------------
// Block averaging

BlockAverage::BlockAverage(Shape2 shape, Index factor) : shape_(shape), factor_(factor) {
  if (factor <= 0) throw std::invalid_argument("block average: factor must be positive");
  if (shape.rows <= 0 || shape.cols <= 0 || shape.rows % factor != 0 || shape.cols % factor != 0)
    throw std::invalid_argument("block average: factor must divide both image dimensions");
}

Vector BlockAverage::apply(const Vector& x) const {
  if (x.size() != input_size()) throw std::invalid_argument("block average: size mismatch");
  const Shape2 out = output_shape();
  Vector y = Vector::Zero(out.size());
  for (Index r = 0; r < shape_.rows; ++r)
    for (Index c = 0; c < shape_.cols; ++c) y[(r / factor_) * out.cols + c / factor_] += x[r * shape_.cols + c];
  return y / static_cast<double>(factor_ * factor_);
}

Vector BlockAverage::adjoint(const Vector& y) const {
  if (y.size() != output_size()) throw std::invalid_argument("block average: size mismatch");
  const Shape2 out = output_shape();
  Vector x(input_size());
  const double w = 1.0 / static_cast<double>(factor_ * factor_);
  for (Index r = 0; r < shape_.rows; ++r)
    for (Index c = 0; c < shape_.cols; ++c) x[r * shape_.cols + c] = w * y[(r / factor_) * out.cols + c / factor_];
  return x;
}

Vector BlockAverage::apply_gram_function(const Vector& x, const std::function<double(double)>& g) const {
  const double f2 = static_cast<double>(factor_ * factor_);
  // P x replicates block means back to full resolution.
  const Vector projected = adjoint(apply(x)) * f2;
  return g(1.0 / f2) * projected + g(0.0) * (x - projected);
}

Vector BlockAverage::gram_eigenvalues() const {
  // Block-constant subspace first, then its complement.
  const Index blocks = output_size();
  Vector mu = Vector::Zero(input_size());
  mu.head(blocks).setConstant(1.0 / static_cast<double>(factor_ * factor_));
  return mu;
}

Matrix materialize(const LinearOperator& op) {
  Matrix out(op.output_size(), op.input_size());
  Vector e = Vector::Zero(op.input_size());
  for (Index j = 0; j < op.input_size(); ++j) {
    e[j] = 1.0;
    out.col(j) = op.apply(e);
    e[j] = 0.0;
  }
  return out;
}

Vector circ_conv2d(const Vector& x, Shape2 shape, const Matrix& kernel) {
  return CircularConvolution(shape, kernel).apply(x);
}

Vector block_downsample(const Vector& x, Shape2 shape, Index factor) { return BlockAverage(shape, factor).apply(x); }

Matrix gaussian_kernel(Index size, double std_dev) {
  if (size <= 0 || size % 2 == 0) throw std::invalid_argument("gaussian kernel: size must be odd and positive");
  if (!(std_dev > 0.0)) throw std::invalid_argument("gaussian kernel: std must be positive");
  Matrix k(size, size);
  const double c = static_cast<double>(size / 2);
  for (Index a = 0; a < size; ++a)
    for (Index b = 0; b < size; ++b) {
      const double da = static_cast<double>(a) - c;
      const double db = static_cast<double>(b) - c;
      k(a, b) = std::exp(-(da * da + db * db) / (2.0 * std_dev * std_dev));
    }
  return k / k.sum();
}

// ---------------------------------------------------------------------------
// Magnitude models

MagnitudeModel::MagnitudeModel(MagnitudeKind kind, Shape2 in, Shape2 out, ComplexVector mask, Index pad)
    : kind_(kind),
      input_shape_(in),
      output_shape_(out),
      mask_(std::move(mask)),
      pad_factor_(pad),
      fft_(std::make_shared<UnitaryFft2>(out)) {}

MagnitudeModel MagnitudeModel::cdp(Shape2 shape, ComplexVector mask) {
  if (shape.size() <= 0) throw std::invalid_argument("cdp: empty shape");
  if (mask.size() != shape.size()) throw std::invalid_argument("cdp: mask size mismatch");
  for (Index i = 0; i < mask.size(); ++i)
    if (std::abs(std::abs(mask[i]) - 1.0) > 1e-12) throw std::invalid_argument("cdp: mask entries must be unit-modulus");
  return MagnitudeModel(MagnitudeKind::CDP, shape, shape, std::move(mask), 1);
}

MagnitudeModel MagnitudeModel::fpr(Shape2 shape, Index pad_factor) {
  if (shape.size() <= 0) throw std::invalid_argument("fpr: empty shape");
  if (pad_factor < 1) throw std::invalid_argument("fpr: pad factor must be >= 1");
  const Shape2 padded{shape.rows * pad_factor, shape.cols * pad_factor};
  return MagnitudeModel(MagnitudeKind::FPR, shape, padded, ComplexVector(), pad_factor);
}

ComplexVector MagnitudeModel::field(const Vector& x) const {
  if (x.size() != input_shape_.size()) throw std::invalid_argument("magnitude model: input size mismatch");
  if (kind_ == MagnitudeKind::CDP) return fft_->forward(mask_.cwiseProduct(x.cast<std::complex<double>>()));
  ComplexVector padded = ComplexVector::Zero(output_shape_.size());
  for (Index r = 0; r < input_shape_.rows; ++r)
    for (Index c = 0; c < input_shape_.cols; ++c)
      padded[r * output_shape_.cols + c] = x[r * input_shape_.cols + c];
  return fft_->forward(padded);
}

Vector MagnitudeModel::forward(const Vector& x) const { return field(x).cwiseAbs(); }

Vector MagnitudeModel::adjoint_real(const ComplexVector& w) const {
  if (w.size() != output_shape_.size()) throw std::invalid_argument("magnitude model: output size mismatch");
  const ComplexVector back = fft_->inverse(w);
  if (kind_ == MagnitudeKind::CDP) return mask_.conjugate().cwiseProduct(back).real();
  Vector x(input_shape_.size());
  for (Index r = 0; r < input_shape_.rows; ++r)
    for (Index c = 0; c < input_shape_.cols; ++c)
      x[r * input_shape_.cols + c] = back[r * output_shape_.cols + c].real();
  return x;
}

ComplexVector mask_from_phases(const Vector& phases) {
  ComplexVector mask(phases.size());
  for (Index i = 0; i < phases.size(); ++i) mask[i] = std::polar(1.0, phases[i]);
  return mask;
}

Vector random_mask_phases(Index n, Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
  Vector phases(n);
  for (Index i = 0; i < n; ++i) phases[i] = uniform(rng);
  return phases;
}

Vector cdp_forward(const Vector& x, Shape2 shape, const ComplexVector& mask) {
  return MagnitudeModel::cdp(shape, mask).forward(x);
}

Vector fpr_forward(const Vector& x, Shape2 shape, Index pad_factor) {
  return MagnitudeModel::fpr(shape, pad_factor).forward(x);
}

Vector circular_point_reflection(const Vector& x, Shape2 shape) {
  if (x.size() != shape.size()) throw std::invalid_argument("reflection: size mismatch");
  Vector out(x.size());
  for (Index r = 0; r < shape.rows; ++r)
    for (Index c = 0; c < shape.cols; ++c)
      out[r * shape.cols + c] = x[((shape.rows - r) % shape.rows) * shape.cols + (shape.cols - c) % shape.cols];
  return out;
}

Vector rotate180(const Vector& x, Shape2 shape) {
  if (x.size() != shape.size()) throw std::invalid_argument("rotation: size mismatch");
  return x.reverse();
}

// ---------------------------------------------------------------------------
// Likelihood potentials

LinearGaussianLikelihood::LinearGaussianLikelihood(std::shared_ptr<const LinearOperator> op, Vector y,
                                                   double noise_std)
    : LinearGaussianLikelihood(op, y, Vector::Constant(y.size(), noise_std)) {
  isotropic_ = true;
}

LinearGaussianLikelihood::LinearGaussianLikelihood(std::shared_ptr<const LinearOperator> op, Vector y,
                                                   Vector noise_std)
    : op_(std::move(op)), y_(std::move(y)), noise_std_(std::move(noise_std)), isotropic_(false) {
  if (!op_) throw std::invalid_argument("likelihood: null operator");
  if (y_.size() != op_->output_size()) throw std::invalid_argument("likelihood: measurement size mismatch");
  if (noise_std_.size() != y_.size()) throw std::invalid_argument("likelihood: noise std size mismatch");
  if (!(noise_std_.minCoeff() > 0.0)) throw std::invalid_argument("likelihood: noise std must be positive");
  isotropic_ = (noise_std_.array() == noise_std_[0]).all();
}

double LinearGaussianLikelihood::value(const Vector& x) const {
  return 0.5 * (y_ - op_->apply(x)).cwiseQuotient(noise_std_).squaredNorm();
}

Vector LinearGaussianLikelihood::gradient(const Vector& x) const {
  const Vector weighted = (y_ - op_->apply(x)).cwiseQuotient(noise_std_.cwiseAbs2());
  return -op_->adjoint(weighted);
}

MagnitudeLikelihood::MagnitudeLikelihood(MagnitudeModel model, Vector y, double noise_std)
    : model_(std::move(model)), y_(std::move(y)), sigma_(noise_std) {
  if (y_.size() != model_.output_shape().size()) throw std::invalid_argument("likelihood: measurement size mismatch");
  if (!(sigma_ > 0.0)) throw std::invalid_argument("likelihood: noise std must be positive");
}

double MagnitudeLikelihood::value(const Vector& x) const {
  return (y_ - model_.forward(x)).squaredNorm() / (2.0 * sigma_ * sigma_);
}

Vector MagnitudeLikelihood::gradient(const Vector& x) const {
  const ComplexVector u = model_.field(x);
  ComplexVector w(u.size());
  const double inv_var = 1.0 / (sigma_ * sigma_);
  for (Index k = 0; k < u.size(); ++k) {
    const double mag = std::abs(u[k]);
    w[k] = mag > 0.0 ? (mag - y_[k]) * inv_var * (u[k] / mag) : std::complex<double>(0.0, 0.0);
  }
  return model_.adjoint_real(w);
}

double likelihood_value(const LikelihoodPotential& f, const Vector& x) { return f.value(x); }
Vector likelihood_grad(const LikelihoodPotential& f, const Vector& x) { return f.gradient(x); }

}  // namespace pnpdm
