#include "pnpdm/npy.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <regex>
#include <sstream>
#include <string>

namespace pnpdm {

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

namespace {

constexpr char kMagic[] = "\x93NUMPY";
constexpr std::size_t kMagicLen = 6;

std::size_t element_size(DType t) { return t == DType::Float64 ? 8 : 4; }

std::string header_text(const NdArray& a) {
  std::ostringstream shape;
  shape << '(';
  for (std::size_t i = 0; i < a.shape.size(); ++i) {
    if (i) shape << ", ";
    shape << a.shape[i];
  }
  if (a.shape.size() == 1) shape << ',';
  shape << ')';
  std::string h = std::string("{'descr': '") + (a.dtype == DType::Float64 ? "<f8" : "<f4") +
                  "', 'fortran_order': False, 'shape': " + shape.str() + ", }";
  // Preamble (magic + version + length) is 10 bytes; pad so data starts on a 64-byte boundary.
  const std::size_t total = kMagicLen + 4 + h.size() + 1;
  h.append((64 - total % 64) % 64, ' ');
  h.push_back('\n');
  return h;
}

}  // namespace

std::size_t NdArray::size() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void write_array(const std::filesystem::path& path, const NdArray& a) {
  if (a.size() != a.data.size()) throw std::invalid_argument("write_array: shape does not match data length");
  const std::string header = header_text(a);
  if (header.size() > 0xffff) throw std::invalid_argument("write_array: header too long");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_array: cannot open " + path.string());
  out.write(kMagic, kMagicLen);
  const char version[2] = {1, 0};
  out.write(version, 2);
  const auto len = static_cast<std::uint16_t>(header.size());
  const char len_bytes[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
  out.write(len_bytes, 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  if (a.dtype == DType::Float64) {
    out.write(reinterpret_cast<const char*>(a.data.data()), static_cast<std::streamsize>(a.data.size() * 8));
  } else {
    std::vector<float> narrow(a.data.begin(), a.data.end());
    out.write(reinterpret_cast<const char*>(narrow.data()), static_cast<std::streamsize>(narrow.size() * 4));
  }
  if (!out) throw std::runtime_error("write_array: write failed for " + path.string());
}

void write_array(const std::filesystem::path& path, const Matrix& m, DType dtype) {
  write_array(path, from_matrix(m, dtype));
}

void write_array(const std::filesystem::path& path, const Vector& v, DType dtype) {
  write_array(path, from_vector(v, dtype));
}

NdArray read_array(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArrayFormatError("read_array: cannot open " + path.string());
  const std::string where = " (" + path.string() + ")";

  char pre[8];
  if (!in.read(pre, 8) || std::memcmp(pre, kMagic, kMagicLen) != 0)
    throw ArrayFormatError("read_array: bad magic" + where);
  const auto major = static_cast<unsigned char>(pre[6]);
  // The header length field is 2 bytes in version 1 and 4 bytes in versions 2 and 3.
  std::size_t header_len = 0;
  if (major == 1) {
    unsigned char b[2];
    if (!in.read(reinterpret_cast<char*>(b), 2)) throw ArrayFormatError("read_array: truncated header" + where);
    header_len = b[0] | (static_cast<std::size_t>(b[1]) << 8);
  } else if (major == 2 || major == 3) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw ArrayFormatError("read_array: truncated header" + where);
    header_len = b[0] | (static_cast<std::size_t>(b[1]) << 8) | (static_cast<std::size_t>(b[2]) << 16) |
                 (static_cast<std::size_t>(b[3]) << 24);
  } else {
    throw ArrayFormatError("read_array: unsupported version " + std::to_string(major) + where);
  }

  std::string header(header_len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(header_len)))
    throw ArrayFormatError("read_array: truncated header" + where);

  NdArray a;
  std::smatch m;
  static const std::regex descr_re(R"('descr'\s*:\s*'([^']*)')");
  static const std::regex order_re(R"('fortran_order'\s*:\s*(True|False))");
  static const std::regex shape_re(R"('shape'\s*:\s*\(([^)]*)\))");
  if (!std::regex_search(header, m, descr_re)) throw ArrayFormatError("read_array: header lacks descr" + where);
  if (m[1] == "<f8") {
    a.dtype = DType::Float64;
  } else if (m[1] == "<f4") {
    a.dtype = DType::Float32;
  } else {
    throw ArrayFormatError("read_array: unsupported dtype '" + m[1].str() + "'" + where);
  }
  if (!std::regex_search(header, m, order_re)) throw ArrayFormatError("read_array: header lacks fortran_order" + where);
  if (m[1] == "True") throw ArrayFormatError("read_array: Fortran-ordered arrays are not supported" + where);
  if (!std::regex_search(header, m, shape_re)) throw ArrayFormatError("read_array: header lacks shape" + where);
  {
    std::string dims = m[1];
    std::stringstream ss(dims);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto b = item.find_first_not_of(" \t");
      if (b == std::string::npos) continue;
      const auto e = item.find_last_not_of(" \tL");
      const std::string tok = item.substr(b, e - b + 1);
      if (tok.find_first_not_of("0123456789") != std::string::npos)
        throw ArrayFormatError("read_array: bad shape entry '" + tok + "'" + where);
      a.shape.push_back(static_cast<std::size_t>(std::stoull(tok)));
    }
  }

  const std::size_t count = a.size();
  const std::size_t bytes = count * element_size(a.dtype);
  a.data.resize(count);
  if (a.dtype == DType::Float64) {
    if (!in.read(reinterpret_cast<char*>(a.data.data()), static_cast<std::streamsize>(bytes)))
      throw ArrayFormatError("read_array: truncated payload" + where);
  } else {
    std::vector<float> narrow(count);
    if (!in.read(reinterpret_cast<char*>(narrow.data()), static_cast<std::streamsize>(bytes)))
      throw ArrayFormatError("read_array: truncated payload" + where);
    std::copy(narrow.begin(), narrow.end(), a.data.begin());
  }
  return a;
}

Matrix to_matrix(const NdArray& a) {
  if (a.shape.size() == 1) return to_vector(a);
  if (a.shape.size() != 2) throw std::invalid_argument("to_matrix: expected a 1-D or 2-D array");
  const auto rows = static_cast<Index>(a.shape[0]);
  const auto cols = static_cast<Index>(a.shape[1]);
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(a.data.data(), rows,
                                                                                                 cols);
}

Vector to_vector(const NdArray& a) {
  return Eigen::Map<const Vector>(a.data.data(), static_cast<Index>(a.data.size()));
}

NdArray from_matrix(const Matrix& m, DType dtype) {
  NdArray a;
  a.dtype = dtype;
  a.shape = {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())};
  a.data.resize(static_cast<std::size_t>(m.size()));
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(a.data.data(), m.rows(),
                                                                                    m.cols()) = m;
  return a;
}

NdArray from_vector(const Vector& v, DType dtype) {
  NdArray a;
  a.dtype = dtype;
  a.shape = {static_cast<std::size_t>(v.size())};
  a.data.assign(v.data(), v.data() + v.size());
  return a;
}

}  // namespace pnpdm
