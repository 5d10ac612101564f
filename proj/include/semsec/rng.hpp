#pragma once

#include <cstdint>
#include <random>

namespace semsec {

using Rng = std::mt19937_64;

// Named random streams. Each stream is seeded independently from the master
// seed, so consumption in one never shifts the sequence of another.
enum class Stream : std::uint64_t {
  init = 1,
  data = 2,
  channel_leg = 3,
  channel_eve = 4,
  noise_leg = 5,
  noise_eve = 6,
  text = 7,
  gauss = 8,
  ou = 9,
  buffer = 10,
  eval = 11,
  dataset = 12,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t sub = 0) {
  return splitmix64(splitmix64(splitmix64(master) ^ static_cast<std::uint64_t>(stream)) + sub);
}

inline Rng make_stream(std::uint64_t master, Stream stream, std::uint64_t sub = 0) {
  return Rng(derive_seed(master, stream, sub));
}

}  // namespace semsec
