#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "sonarssl/error.hpp"

namespace sonarssl::io {

// Little-endian primitives shared by the dataset and checkpoint containers.
// Serialization is byte-explicit so files are identical across platforms.

// SSBN1 container conventions: 5-byte magic, then a content-kind byte. The
// kind registry lives here so new container types can't collide.
inline constexpr char kContainerMagic[5] = {'S', 'S', 'B', 'N', '1'};
inline constexpr std::uint8_t kContentDataset = 0;
inline constexpr std::uint8_t kContentScenes = 1;
inline constexpr std::uint8_t kContentCheckpoint = 2;
inline constexpr std::uint8_t kDtypeF32 = 0;

inline void write_u8(std::ostream& os, std::uint8_t v) {
  os.put(static_cast<char>(v));
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

inline void write_i64(std::ostream& os, std::int64_t v) {
  write_u64(os, static_cast<std::uint64_t>(v));
}

inline void write_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  write_u32(os, bits);
}

inline void write_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(os, bits);
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint8_t read_u8(std::istream& is, const char* what) {
  int c = is.get();
  if (c == std::char_traits<char>::eof())
    throw FormatError(std::string("truncated file while reading ") + what);
  return static_cast<std::uint8_t>(c);
}

inline std::uint32_t read_u32(std::istream& is, const char* what) {
  char b[4];
  if (!is.read(b, 4))
    throw FormatError(std::string("truncated file while reading ") + what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

inline std::uint64_t read_u64(std::istream& is, const char* what) {
  char b[8];
  if (!is.read(b, 8))
    throw FormatError(std::string("truncated file while reading ") + what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  return v;
}

inline std::int64_t read_i64(std::istream& is, const char* what) {
  return static_cast<std::int64_t>(read_u64(is, what));
}

inline float read_f32(std::istream& is, const char* what) {
  std::uint32_t bits = read_u32(is, what);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline double read_f64(std::istream& is, const char* what) {
  std::uint64_t bits = read_u64(is, what);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

inline std::string read_string(std::istream& is, const char* what) {
  std::uint32_t n = read_u32(is, what);
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), n))
    throw FormatError(std::string("truncated file while reading ") + what);
  return s;
}

inline void write_f32_block(std::ostream& os, const std::vector<double>& values) {
  for (double v : values) write_f32(os, static_cast<float>(v));
}

inline void read_f32_block(std::istream& is, std::vector<double>& out, std::size_t n,
                           const char* what) {
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(read_f32(is, what));
}

// Round a double to the nearest float32-representable value. Container
// payloads are written as float32, so values quantized at creation time
// survive save/load bit-exactly.
inline double quantize_f32(double v) {
  return static_cast<double>(static_cast<float>(v));
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot open for writing: " + path);
  return os;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open: " + path);
  return is;
}

inline void write_container_header(std::ostream& os, std::uint8_t content_kind) {
  os.write(kContainerMagic, 5);
  write_u8(os, content_kind);
}

inline void check_container_header(std::istream& is, std::uint8_t expected_kind,
                                   const char* kind_name) {
  char magic[5];
  if (!is.read(magic, 5) || !std::equal(magic, magic + 5, kContainerMagic))
    throw FormatError("bad magic (not an SSBN1 file)");
  const std::uint8_t kind = read_u8(is, "content kind");
  if (kind != expected_kind)
    throw FormatError(std::string("content kind: expected ") + kind_name);
}

inline void check_no_trailing(std::istream& is, const std::string& path) {
  if (is.peek() != std::char_traits<char>::eof())
    throw FormatError("trailing bytes after container payload: " + path);
}

}  // namespace sonarssl::io
