#pragma once

#include "pnpdm/fft.hpp"
#include "pnpdm/types.hpp"

#include <functional>
#include <memory>

namespace pnpdm {

/// Real linear operator A with its adjoint.
///
/// Operators with spectral structure expose functions of the Gram matrix:
/// if A^T A = V diag(mu) V^T with V orthonormal (or unitary), then
/// apply_gram_function(x, g) = V diag(g(mu)) V^H x. The exact conjugate
/// likelihood sampler is built on this alone.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  virtual Index input_size() const = 0;
  virtual Index output_size() const = 0;
  virtual Vector apply(const Vector& x) const = 0;
  virtual Vector adjoint(const Vector& y) const = 0;

  virtual bool has_spectral() const { return false; }
  virtual Vector apply_gram_function(const Vector& x, const std::function<double(double)>& g) const;
  // Eigenvalues mu of A^T A, in the operator's spectral ordering.
  virtual Vector gram_eigenvalues() const;
};

/// Dense matrix. Operators with at most kMaxSpectralDim columns cache an SVD.
class DenseOperator final : public LinearOperator {
 public:
  static constexpr Index kMaxSpectralDim = 512;

  explicit DenseOperator(Matrix matrix);

  Index input_size() const override { return matrix_.cols(); }
  Index output_size() const override { return matrix_.rows(); }
  Vector apply(const Vector& x) const override;
  Vector adjoint(const Vector& y) const override;
  bool has_spectral() const override { return basis_.size() != 0; }
  Vector apply_gram_function(const Vector& x, const std::function<double(double)>& g) const override;
  Vector gram_eigenvalues() const override;

  const Matrix& matrix() const { return matrix_; }

 private:
  Matrix matrix_;
  Matrix basis_;  // right singular vectors, n x n
  Vector gram_;   // squared singular values padded with zeros to n
};

/// Circular 2-D convolution with a kernel of at most the image size. The
/// kernel center sits at (floor(h/2), floor(w/2)). Diagonalized by the DFT.
class CircularConvolution final : public LinearOperator {
 public:
  CircularConvolution(Shape2 shape, const Matrix& kernel);

  Index input_size() const override { return shape_.size(); }
  Index output_size() const override { return shape_.size(); }
  Vector apply(const Vector& x) const override;
  Vector adjoint(const Vector& y) const override;
  bool has_spectral() const override { return true; }
  Vector apply_gram_function(const Vector& x, const std::function<double(double)>& g) const override;
  Vector gram_eigenvalues() const override;

  Shape2 shape() const { return shape_; }
  // DFT eigenvalues of the circulant matrix (unnormalized DFT of the shifted kernel).
  const ComplexVector& eigenvalues() const { return eigenvalues_; }

 private:
  Shape2 shape_;
  std::shared_ptr<const UnitaryFft2> fft_;
  ComplexVector eigenvalues_;
};

/// Mean over non-overlapping factor x factor blocks.
class BlockAverage final : public LinearOperator {
 public:
  BlockAverage(Shape2 shape, Index factor);

  Index input_size() const override { return shape_.size(); }
  Index output_size() const override { return output_shape().size(); }
  Vector apply(const Vector& x) const override;
  Vector adjoint(const Vector& y) const override;
  bool has_spectral() const override { return true; }
  // A^T A = P / f^2 with P the projector onto block-constant images.
  Vector apply_gram_function(const Vector& x, const std::function<double(double)>& g) const override;
  Vector gram_eigenvalues() const override;

  Shape2 shape() const { return shape_; }
  Shape2 output_shape() const { return {shape_.rows / factor_, shape_.cols / factor_}; }
  Index factor() const { return factor_; }

 private:
  Shape2 shape_;
  Index factor_;
};

Matrix materialize(const LinearOperator& op);

Vector circ_conv2d(const Vector& x, Shape2 shape, const Matrix& kernel);
Vector block_downsample(const Vector& x, Shape2 shape, Index factor);

// Normalized isotropic Gaussian blur kernel of odd size.
Matrix gaussian_kernel(Index size, double std_dev);

enum class MagnitudeKind { CDP, FPR };

/// Magnitude-only measurements |T x| with T = F D (coded diffraction with a
/// unit-modulus mask D) or T = F P (zero-padded Fourier transform). F is the
/// unitary 2-D DFT; P places the image in the top-left corner of the padded grid.
class MagnitudeModel {
 public:
  static MagnitudeModel cdp(Shape2 shape, ComplexVector mask);
  static MagnitudeModel fpr(Shape2 shape, Index pad_factor);

  MagnitudeKind kind() const { return kind_; }
  Shape2 input_shape() const { return input_shape_; }
  Shape2 output_shape() const { return output_shape_; }
  const ComplexVector& mask() const { return mask_; }
  Index pad_factor() const { return pad_factor_; }

  ComplexVector field(const Vector& x) const;
  Vector forward(const Vector& x) const;
  // Re(T^H w).
  Vector adjoint_real(const ComplexVector& w) const;

 private:
  MagnitudeModel(MagnitudeKind kind, Shape2 in, Shape2 out, ComplexVector mask, Index pad);

  MagnitudeKind kind_;
  Shape2 input_shape_;
  Shape2 output_shape_;
  ComplexVector mask_;
  Index pad_factor_ = 1;
  std::shared_ptr<const UnitaryFft2> fft_;
};

ComplexVector mask_from_phases(const Vector& phases);
// Phases i.i.d. uniform on [0, 2 pi).
Vector random_mask_phases(Index n, Rng& rng);

Vector cdp_forward(const Vector& x, Shape2 shape, const ComplexVector& mask);
Vector fpr_forward(const Vector& x, Shape2 shape, Index pad_factor);

// x'[i, j] = x[(-i) mod H, (-j) mod W].
Vector circular_point_reflection(const Vector& x, Shape2 shape);
// x'[i, j] = x[H-1-i, W-1-j].
Vector rotate180(const Vector& x, Shape2 shape);

/// Negative log-likelihood f(x; y) up to an additive constant.
class LikelihoodPotential {
 public:
  virtual ~LikelihoodPotential() = default;
  virtual Index dim() const = 0;
  virtual double value(const Vector& x) const = 0;
  virtual Vector gradient(const Vector& x) const = 0;
};

/// f(x) = 1/2 || (y - A x) / sigma ||^2 with isotropic or per-measurement noise std.
class LinearGaussianLikelihood final : public LikelihoodPotential {
 public:
  LinearGaussianLikelihood(std::shared_ptr<const LinearOperator> op, Vector y, double noise_std);
  LinearGaussianLikelihood(std::shared_ptr<const LinearOperator> op, Vector y, Vector noise_std);

  Index dim() const override { return op_->input_size(); }
  double value(const Vector& x) const override;
  Vector gradient(const Vector& x) const override;

  const LinearOperator& op() const { return *op_; }
  std::shared_ptr<const LinearOperator> op_ptr() const { return op_; }
  const Vector& measurement() const { return y_; }
  const Vector& noise_std() const { return noise_std_; }
  bool isotropic() const { return isotropic_; }

 private:
  std::shared_ptr<const LinearOperator> op_;
  Vector y_;
  Vector noise_std_;
  bool isotropic_;
};

/// f(x) = || y - |T x| ||^2 / (2 sigma^2). The phase factor u/|u| is taken as
/// 0 wherever |u| = 0.
class MagnitudeLikelihood final : public LikelihoodPotential {
 public:
  MagnitudeLikelihood(MagnitudeModel model, Vector y, double noise_std);

  Index dim() const override { return model_.input_shape().size(); }
  double value(const Vector& x) const override;
  Vector gradient(const Vector& x) const override;

  const MagnitudeModel& model() const { return model_; }
  const Vector& measurement() const { return y_; }
  double noise_std() const { return sigma_; }

 private:
  MagnitudeModel model_;
  Vector y_;
  double sigma_;
};

double likelihood_value(const LikelihoodPotential& f, const Vector& x);
Vector likelihood_grad(const LikelihoodPotential& f, const Vector& x);

}  // namespace pnpdm
