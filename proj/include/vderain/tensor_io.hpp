#pragma once

// Tensor container:
//   "S2VDTNSR" | u32 version (1) | u32 ndim | ndim x u32 dims | u32 dtype (0 = f32) | raw row-major data
// All integers and floats little-endian.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "vderain/tensor.hpp"

namespace vderain {

inline constexpr std::array<char, 8> kTensorMagic{'S', '2', 'V', 'D', 'T', 'N', 'S', 'R'};
inline constexpr std::uint32_t kTensorVersion = 1;
inline constexpr std::uint32_t kDtypeF32 = 0;
inline constexpr std::uint32_t kMaxRank = 16;

static_assert(std::endian::native == std::endian::little, "tensor container I/O assumes a little-endian host");

namespace detail {
inline void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

inline std::uint32_t get_u32(std::istream& is, const char* what) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) throw TruncatedError(std::string("tensor container truncated in ") + what);
  return v;
}
}  // namespace detail

inline void write_tensor(std::ostream& os, const Tensor<float>& t) {
  os.write(kTensorMagic.data(), kTensorMagic.size());
  detail::put_u32(os, kTensorVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) {
    if (d > std::numeric_limits<std::uint32_t>::max()) throw DimensionOverflowError("dimension does not fit in u32");
    detail::put_u32(os, static_cast<std::uint32_t>(d));
  }
  detail::put_u32(os, kDtypeF32);
  os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
  if (!os) throw IoError("failed writing tensor container");
}

inline Tensor<float> read_tensor(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size())) throw TruncatedError("tensor container truncated in magic");
  if (magic != kTensorMagic) throw BadMagicError("not a tensor container (bad magic)");
  const auto version = detail::get_u32(is, "version");
  if (version != kTensorVersion) throw IoError("unsupported tensor container version " + std::to_string(version));
  const auto ndim = detail::get_u32(is, "rank");
  if (ndim > kMaxRank) throw DimensionOverflowError("tensor rank " + std::to_string(ndim) + " exceeds limit");
  Shape shape(ndim);
  std::uint64_t count = 1;
  constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 40;
  for (auto& d : shape) {
    d = detail::get_u32(is, "dims");
    count *= d;
    if (count > kMaxElements) throw DimensionOverflowError("tensor element count overflows");
  }
  const auto dtype = detail::get_u32(is, "dtype");
  if (dtype != kDtypeF32) throw IoError("unsupported dtype code " + std::to_string(dtype));
  Tensor<float> t(shape);
  const auto bytes = static_cast<std::streamsize>(t.size() * sizeof(float));
  if (bytes && !is.read(reinterpret_cast<char*>(t.data()), bytes))
    throw TruncatedError("tensor container truncated: expected " + std::to_string(bytes) + " data bytes, got " +
                         std::to_string(is.gcount()));
  return t;
}

inline std::string tensor_to_bytes(const Tensor<float>& t) {
  std::ostringstream os(std::ios::binary);
  write_tensor(os, t);
  return std::move(os).str();
}

inline Tensor<float> tensor_from_bytes(const std::string& bytes) {
  std::istringstream is(bytes, std::ios::binary);
  return read_tensor(is);
}

inline void write_tensor_container(const std::string& path, const Tensor<float>& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_tensor(os, t);
}

inline Tensor<float> read_tensor_container(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  try {
    return read_tensor(is);
  } catch (const TruncatedError& e) {
    throw TruncatedError(path + ": " + e.what());
  } catch (const BadMagicError& e) {
    throw BadMagicError(path + ": " + e.what());
  } catch (const DimensionOverflowError& e) {
    throw DimensionOverflowError(path + ": " + e.what());
  }
}

}  // namespace vderain
