#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "ralab/common.hpp"

// Little-endian primitive encoding for the checkpoint and index files.
namespace ralab::bin {

template <typename T>
  requires std::is_integral_v<T>
void put(std::ostream& out, T v) {
  using U = std::make_unsigned_t<T>;
  U u = static_cast<U>(v);
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((u >> (8 * i)) & 0xffu);
  out.write(buf, sizeof(T));
}

inline void put_f32(std::ostream& out, float v) { put(out, std::bit_cast<std::uint32_t>(v)); }

inline void put_str(std::ostream& out, const std::string& s) {
  put(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void put_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

template <typename T>
  requires std::is_integral_v<T>
T get(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw IOError("unexpected end of file");
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<std::make_unsigned_t<T>>(buf[i]) << (8 * i);
  return static_cast<T>(u);
}

inline float get_f32(std::istream& in) { return std::bit_cast<float>(get<std::uint32_t>(in)); }

inline std::string get_str(std::istream& in, std::uint32_t max_len = 1u << 24) {
  auto n = get<std::uint32_t>(in);
  if (n > max_len) throw IOError("string length out of range");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw IOError("unexpected end of file");
  return s;
}

inline void expect_magic(std::istream& in, const char (&magic)[5]) {
  char buf[4];
  if (!in.read(buf, 4) || std::memcmp(buf, magic, 4) != 0)
    throw IOError(std::string("bad magic, expected ") + magic);
}

}  // namespace ralab::bin
