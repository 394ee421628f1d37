#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "fakeseg/error.hpp"

// Little-endian primitives shared by the feature and checkpoint formats.
namespace fakeseg::binio {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xffu), static_cast<char>((v >> 8) & 0xffu),
                              static_cast<char>((v >> 16) & 0xffu),
                              static_cast<char>((v >> 24) & 0xffu)};
  os.write(b.data(), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw FormatError("unexpected end of file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& os, float v) { put_u32(os, std::bit_cast<std::uint32_t>(v)); }

inline float get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is)); }

inline void put_magic(std::ostream& os, std::string_view magic) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& is, std::string_view magic) {
  std::string got(magic.size(), '\0');
  if (!is.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic) {
    throw FormatError("bad magic, expected \"" + std::string(magic) + "\"");
  }
}

inline void put_string(std::ostream& os, std::string_view s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is, std::uint32_t max_len = 1u << 24) {
  const auto n = get_u32(is);
  if (n > max_len) throw FormatError("string length out of range");
  std::string s(n, '\0');
  if (!is.read(s.data(), n)) throw FormatError("unexpected end of file");
  return s;
}

}  // namespace fakeseg::binio
