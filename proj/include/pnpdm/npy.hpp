#pragma once

#include "pnpdm/types.hpp"

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace pnpdm {

// Little-endian float payloads, C order. Values are held as doubles; float32
// files widen on read and narrow again on write, which is exact.
enum class DType { Float64, Float32 };

struct NdArray {
  std::vector<std::size_t> shape;  // empty for a 0-d scalar
  std::vector<double> data;
  DType dtype = DType::Float64;

  std::size_t size() const;
};

class ArrayFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes NPY format 1.0 ("<f8" or "<f4", fortran_order False).
void write_array(const std::filesystem::path& path, const NdArray& array);
void write_array(const std::filesystem::path& path, const Matrix& m, DType dtype = DType::Float64);
void write_array(const std::filesystem::path& path, const Vector& v, DType dtype = DType::Float64);

/// Reads NPY 1.x/2.x files holding "<f8" or "<f4" data in C order. Throws
/// ArrayFormatError on bad magic, an unparsable header or a short payload.
NdArray read_array(const std::filesystem::path& path);

// 2-D arrays map to rows x cols; 1-D arrays become a single column.
Matrix to_matrix(const NdArray& a);
// Any array, flattened in C order.
Vector to_vector(const NdArray& a);
NdArray from_matrix(const Matrix& m, DType dtype = DType::Float64);
NdArray from_vector(const Vector& v, DType dtype = DType::Float64);

}  // namespace pnpdm
