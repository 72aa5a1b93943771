#pragma once

// Minimal zip archive support: entries are written uncompressed ("stored")
// and only stored entries can be read back. CRC-32 comes from zlib.

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "vderain/error.hpp"

namespace vderain::zip {

namespace detail {

inline void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

inline void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get(const std::string& buf, std::size_t pos, int bytes) {
  if (pos + static_cast<std::size_t>(bytes) > buf.size()) throw TruncatedError("zip archive is truncated");
  std::uint32_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(i)]);
  return v;
}

inline std::uint32_t crc(const std::string& data) {
  uLong c = crc32(0L, Z_NULL, 0);
  const auto* p = reinterpret_cast<const Bytef*>(data.data());
  std::size_t left = data.size();
  while (left > 0) {
    const uInt n = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    c = crc32(c, p, n);
    p += n;
    left -= n;
  }
  return static_cast<std::uint32_t>(c);
}

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;
constexpr std::uint16_t kDosDate = (1 << 5) | 1;  // 1980-01-01, fixed for reproducible archives

}  // namespace detail

/// Ordered list of (name, bytes) written as a stored zip.
class Writer {
 public:
  void add(const std::string& name, std::string data) {
    if (name.empty() || name.size() > 0xffff) throw ValueError("zip entry name must have 1..65535 bytes");
    if (data.size() >= 0xffffffffull) throw ValueError("zip entry '" + name + "' is too large (zip64 not supported)");
    for (const auto& e : entries_)
      if (e.first == name) throw ValueError("duplicate zip entry '" + name + "'");
    entries_.emplace_back(name, std::move(data));
  }

  std::string bytes() const {
    using namespace detail;
    std::string out, central;
    for (const auto& [name, data] : entries_) {
      const auto offset = static_cast<std::uint32_t>(out.size());
      const std::uint32_t c = crc(data);
      const auto size = static_cast<std::uint32_t>(data.size());
      put32(out, kLocalSig);
      put16(out, 20);  // version needed
      put16(out, 0);   // flags
      put16(out, 0);   // method: stored
      put16(out, 0);   // time
      put16(out, kDosDate);
      put32(out, c);
      put32(out, size);
      put32(out, size);
      put16(out, static_cast<std::uint16_t>(name.size()));
      put16(out, 0);
      out += name;
      out += data;

      put32(central, kCentralSig);
      put16(central, 20);  // made by
      put16(central, 20);
      put16(central, 0);
      put16(central, 0);
      put16(central, 0);
      put16(central, kDosDate);
      put32(central, c);
      put32(central, size);
      put32(central, size);
      put16(central, static_cast<std::uint16_t>(name.size()));
      put16(central, 0);  // extra
      put16(central, 0);  // comment
      put16(central, 0);  // disk
      put16(central, 0);  // internal attrs
      put32(central, 0);  // external attrs
      put32(central, offset);
      central += name;
    }
    if (out.size() + central.size() >= 0xffffffffull) throw ValueError("zip archive too large (zip64 not supported)");
    const auto cd_offset = static_cast<std::uint32_t>(out.size());
    out += central;
    put32(out, kEndSig);
    put16(out, 0);
    put16(out, 0);
    put16(out, static_cast<std::uint16_t>(entries_.size()));
    put16(out, static_cast<std::uint16_t>(entries_.size()));
    put32(out, static_cast<std::uint32_t>(central.size()));
    put32(out, cd_offset);
    put16(out, 0);
    return out;
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    const std::string b = bytes();
    f.write(b.data(), static_cast<std::streamsize>(b.size()));
    if (!f) throw IoError("failed writing '" + path + "'");
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Reads every entry of a stored zip; CRCs are verified.
inline std::map<std::string, std::string> read_all(const std::string& buf) {
  using namespace detail;
  if (buf.size() < 22) throw TruncatedError("zip archive is truncated");
  std::size_t eocd = std::string::npos;
  const std::size_t lo = buf.size() > 22 + 0xffff ? buf.size() - 22 - 0xffff : 0;
  for (std::size_t p = buf.size() - 22 + 1; p-- > lo;)
    if (get(buf, p, 4) == kEndSig) {
      eocd = p;
      break;
    }
  if (eocd == std::string::npos) throw BadMagicError("not a zip archive (no end-of-central-directory record)");
  const std::uint32_t count = get(buf, eocd + 10, 2);
  std::size_t p = get(buf, eocd + 16, 4);
  std::map<std::string, std::string> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    if (get(buf, p, 4) != kCentralSig) throw BadMagicError("corrupt zip central directory");
    const std::uint32_t method = get(buf, p + 10, 2);
    const std::uint32_t c = get(buf, p + 16, 4);
    const std::uint32_t csize = get(buf, p + 20, 4);
    const std::uint32_t name_len = get(buf, p + 28, 2);
    const std::uint32_t extra_len = get(buf, p + 30, 2);
    const std::uint32_t comment_len = get(buf, p + 32, 2);
    const std::uint32_t local = get(buf, p + 42, 4);
    if (p + 46 + name_len > buf.size()) throw TruncatedError("zip archive is truncated");
    const std::string name = buf.substr(p + 46, name_len);
    if (method != 0) throw IoError("zip entry '" + name + "' is compressed; only stored entries are supported");
    if (get(buf, local, 4) != kLocalSig) throw BadMagicError("corrupt zip local header for '" + name + "'");
    const std::size_t data_at = local + 30 + get(buf, local + 26, 2) + get(buf, local + 28, 2);
    if (data_at + csize > buf.size()) throw TruncatedError("zip entry '" + name + "' is truncated");
    std::string data = buf.substr(data_at, csize);
    if (crc(data) != c) throw IoError("zip entry '" + name + "' fails its CRC check");
    out.emplace(name, std::move(data));
    p += 46 + name_len + extra_len + comment_len;
  }
  return out;
}

inline std::map<std::string, std::string> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return read_all(buf);
}

}  // namespace vderain::zip
