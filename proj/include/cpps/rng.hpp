#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cpps {

// splitmix64, used to expand one master seed into independent component seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic sub-seed for a named stream; tag strings are part of the
// reproducibility contract, do not rename casually.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                 std::uint64_t index = 0) {
  std::uint64_t h = master;
  for (char c : tag) h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
  return splitmix64(h ^ splitmix64(index));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(splitmix64(seed)); }

}  // namespace cpps
