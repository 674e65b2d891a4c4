#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>

#include "seb/errors.hpp"
#include "seb/matrix.hpp"

// Little-endian primitives shared by the binary file formats, plus the
// text formatting used by the CSV outputs.

namespace seb {

// Enough digits for the printed value to parse back to the same double, so
// identical runs produce byte-identical text files.
inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline void write_u8(std::ostream& os, std::uint8_t v) {
  os.put(static_cast<char>(v));
}

inline void write_u16(std::ostream& os, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline void write_f64(std::ostream& os, double v) {
  write_u64(os, std::bit_cast<std::uint64_t>(v));
}

inline void read_exact(std::istream& is, char* buf, std::size_t n) {
  is.read(buf, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw Error("truncated file");
}

inline std::uint8_t read_u8(std::istream& is) {
  char b;
  read_exact(is, &b, 1);
  return static_cast<std::uint8_t>(b);
}

inline std::uint16_t read_u16(std::istream& is) {
  char b[2];
  read_exact(is, b, 2);
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[0]) |
                                    (static_cast<unsigned char>(b[1]) << 8));
}

inline std::uint32_t read_u32(std::istream& is) {
  char b[4];
  read_exact(is, b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i]))
         << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& is) {
  char b[8];
  read_exact(is, b, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i]))
         << (8 * i);
  return v;
}

inline double read_f64(std::istream& is) {
  return std::bit_cast<double>(read_u64(is));
}

inline void write_string(std::ostream& os, const std::string& s) {
  if (s.size() > 0xffff) throw Error("string too long for file format");
  write_u16(os, static_cast<std::uint16_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  std::uint16_t n = read_u16(is);
  std::string s(n, '\0');
  if (n > 0) read_exact(is, s.data(), n);
  return s;
}

inline void write_doubles(std::ostream& os, const std::vector<double>& v) {
  for (double x : v) write_f64(os, x);
}

inline void read_doubles(std::istream& is, std::vector<double>& v) {
  for (double& x : v) x = read_f64(is);
}

inline void write_matrix_body(std::ostream& os, const Matrix& m) {
  write_doubles(os, m.data);
}

inline void read_matrix_body(std::istream& is, Matrix& m) {
  read_doubles(is, m.data);
}

}  // namespace seb
