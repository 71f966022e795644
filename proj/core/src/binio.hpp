#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "pqi/error.hpp"

namespace pqi::binio {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T v) noexcept {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return v;
  }
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

inline void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw DataError("unexpected end of binary stream");
  }
  return to_little(v);
}

inline float get_f32(std::istream& in) { return std::bit_cast<float>(get_u32(in)); }

inline std::string get_string(std::istream& in, std::uint32_t max_len = 1u << 20) {
  const std::uint32_t n = get_u32(in);
  if (n > max_len) {
    throw DataError("string field too long in binary stream");
  }
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), n)) {
    throw DataError("unexpected end of binary stream");
  }
  return s;
}

inline void expect_magic(std::istream& in, const char (&magic)[9], const char* what) {
  char buf[8];
  if (!in.read(buf, 8) || std::memcmp(buf, magic, 8) != 0) {
    throw DataError(std::string("bad magic: not a ") + what);
  }
}

}  // namespace pqi::binio
