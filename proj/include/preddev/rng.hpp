#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace preddev {

using Rng = std::mt19937_64;

/// Independent, reproducible stream for a named job, e.g. "fit.restart.3"
/// or "boot.17". All randomness flows from one user seed through these.
inline Rng derive_stream(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (h | 1);  // splitmix64 finalizer
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z ^= z >> 31;
  return Rng(z);
}

inline Rng derive_stream(std::uint64_t seed, std::string_view prefix, long index) {
  return derive_stream(seed, std::string(prefix) + "." + std::to_string(index));
}

}  // namespace preddev
