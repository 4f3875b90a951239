#pragma once

#include "pnpdm/types.hpp"

#include <memory>

namespace pnpdm {

/// Unitary 2-D DFT over a fixed row-major shape (1/sqrt(n) per direction).
/// Plans are created once; transforms are reentrant.
class UnitaryFft2 {
 public:
  explicit UnitaryFft2(Shape2 shape);
  ~UnitaryFft2();
  UnitaryFft2(const UnitaryFft2&) = delete;
  UnitaryFft2& operator=(const UnitaryFft2&) = delete;

  Shape2 shape() const { return shape_; }
  ComplexVector forward(const ComplexVector& x) const;
  ComplexVector inverse(const ComplexVector& x) const;

 private:
  Shape2 shape_;
  struct Plans;
  std::unique_ptr<Plans> plans_;
};

}  // namespace pnpdm
