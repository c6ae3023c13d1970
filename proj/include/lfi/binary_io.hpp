#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "lfi/errors.hpp"
#include "lfi/numeric.hpp"

namespace lfi::binary {

inline void write_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(buf, 8);
}

inline void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void write_vector(std::ostream& out, const Eigen::Ref<const Vector>& v) {
  write_u64(out, static_cast<std::uint64_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) write_f64(out, v[i]);
}

inline void read_exact(std::istream& in, char* buf, std::size_t n, const char* what) {
  in.read(buf, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw FormatError(std::string("truncated file while reading ") + what);
}

inline std::uint64_t read_u64(std::istream& in, const char* what) {
  unsigned char buf[8];
  read_exact(in, reinterpret_cast<char*>(buf), 8, what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

inline double read_f64(std::istream& in, const char* what) { return std::bit_cast<double>(read_u64(in, what)); }

/// Lengths above `limit` are treated as corruption rather than allocated.
inline std::string read_string(std::istream& in, const char* what, std::uint64_t limit = 1u << 26) {
  const std::uint64_t n = read_u64(in, what);
  if (n > limit) throw FormatError(std::string("implausible length while reading ") + what);
  std::string s(n, '\0');
  read_exact(in, s.data(), n, what);
  return s;
}

inline Vector read_vector(std::istream& in, const char* what, std::uint64_t limit = 1u << 26) {
  const std::uint64_t n = read_u64(in, what);
  if (n > limit) throw FormatError(std::string("implausible length while reading ") + what);
  Vector v(static_cast<Index>(n));
  for (Index i = 0; i < v.size(); ++i) v[i] = read_f64(in, what);
  return v;
}

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
  char buf[4];
  in.read(buf, 4);
  if (in.gcount() != 4 || std::memcmp(buf, magic, 4) != 0)
    throw FormatError(std::string("bad magic bytes: expected ") + magic);
}

}  // namespace lfi::binary
