#include "pnpdm/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <stdexcept>

namespace pnpdm {
namespace {

// FFTW planning is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

fftw_complex* as_fftw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace

struct UnitaryFft2::Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

UnitaryFft2::UnitaryFft2(Shape2 shape) : shape_(shape), plans_(std::make_unique<Plans>()) {
  if (shape_.rows <= 0 || shape_.cols <= 0) throw std::invalid_argument("fft: shape must be positive");
  ComplexVector in(shape_.size()), out(shape_.size());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  std::lock_guard lock(planner_mutex());
  plans_->forward = fftw_plan_dft_2d(static_cast<int>(shape_.rows), static_cast<int>(shape_.cols),
                                     as_fftw(in.data()), as_fftw(out.data()), FFTW_FORWARD, flags);
  plans_->backward = fftw_plan_dft_2d(static_cast<int>(shape_.rows), static_cast<int>(shape_.cols),
                                      as_fftw(in.data()), as_fftw(out.data()), FFTW_BACKWARD, flags);
  if (!plans_->forward || !plans_->backward) throw std::runtime_error("fft: planning failed");
}

UnitaryFft2::~UnitaryFft2() {
  std::lock_guard lock(planner_mutex());
  if (plans_->forward) fftw_destroy_plan(plans_->forward);
  if (plans_->backward) fftw_destroy_plan(plans_->backward);
}

ComplexVector UnitaryFft2::forward(const ComplexVector& x) const {
  if (x.size() != shape_.size()) throw std::invalid_argument("fft: size mismatch");
  ComplexVector in = x;
  ComplexVector out(x.size());
  fftw_execute_dft(plans_->forward, as_fftw(in.data()), as_fftw(out.data()));
  out *= 1.0 / std::sqrt(static_cast<double>(shape_.size()));
  return out;
}

ComplexVector UnitaryFft2::inverse(const ComplexVector& x) const {
  if (x.size() != shape_.size()) throw std::invalid_argument("fft: size mismatch");
  ComplexVector in = x;
  ComplexVector out(x.size());
  fftw_execute_dft(plans_->backward, as_fftw(in.data()), as_fftw(out.data()));
  out *= 1.0 / std::sqrt(static_cast<double>(shape_.size()));
  return out;
}

}  // namespace pnpdm
