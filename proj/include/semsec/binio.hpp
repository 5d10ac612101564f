#pragma once

#include "semsec/types.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string_view>

// Little-endian primitive encoding used by all checkpoint sections.
namespace semsec::binio {

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw StateError("truncated checkpoint");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

inline void write_tag(std::ostream& out, std::string_view tag) { out.write(tag.data(), static_cast<std::streamsize>(tag.size())); }

inline void expect_tag(std::istream& in, std::string_view tag) {
  char buf[16] = {};
  if (tag.size() > sizeof(buf) || !in.read(buf, static_cast<std::streamsize>(tag.size())) ||
      std::string_view(buf, tag.size()) != tag) {
    throw StateError("checkpoint section '" + std::string(tag) + "' not found");
  }
}

inline void write_vector(std::ostream& out, const Vector& v) {
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) write_le<double>(out, v[i]);
}

inline Vector read_vector(std::istream& in) {
  const auto n = read_le<std::uint64_t>(in);
  if (n > (std::uint64_t{1} << 34)) throw StateError("implausible vector length in checkpoint");
  Vector v(static_cast<Index>(n));
  for (Index i = 0; i < v.size(); ++i) v[i] = read_le<double>(in);
  return v;
}

}  // namespace semsec::binio
