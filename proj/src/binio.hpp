#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>

#include "sysid/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary containers store raw little-endian doubles");

namespace sysid::detail {

inline void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& buf, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) buf.push_back(static_cast<char>((v >> shift) & 0xff));
}

inline void put_doubles(std::string& buf, std::span<const double> vals) {
  const std::size_t old = buf.size();
  buf.resize(old + vals.size() * sizeof(double));
  std::memcpy(buf.data() + old, vals.data(), vals.size() * sizeof(double));
}

inline void write_file(const std::filesystem::path& path, const std::string& buf) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

struct Reader {
  std::string buf;
  std::size_t off = 0;

  explicit Reader(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    buf.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  void need(std::size_t n, const char* what) {
    if (buf.size() - off < n)
      throw IoError(std::string("truncated file while reading ") + what, off);
  }

  void expect_magic(const char magic[4]) {
    need(4, "magic");
    if (std::memcmp(buf.data() + off, magic, 4) != 0) throw IoError("bad magic", off);
    off += 4;
  }

  std::uint16_t u16(const char* what) {
    need(2, what);
    auto v = static_cast<std::uint16_t>(static_cast<unsigned char>(buf[off]) |
                                        (static_cast<unsigned char>(buf[off + 1]) << 8));
    off += 2;
    return v;
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
    off += 4;
    return v;
  }

  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = buf.substr(off, n);
    off += n;
    return s;
  }

  void doubles(std::span<double> dst, const char* what) {
    need(dst.size() * sizeof(double), what);
    std::memcpy(dst.data(), buf.data() + off, dst.size() * sizeof(double));
    off += dst.size() * sizeof(double);
  }

  void expect_eof() {
    if (off != buf.size()) throw IoError("trailing bytes after payload", off);
  }
};

}  // namespace sysid::detail
