#pragma once

#include <cstdint>
#include <random>

namespace piham {

// SplitMix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Deterministic substream: engine k of a root seed is reproducible in
// isolation, independent of how many sibling streams exist or in which
// order they are drawn from.
inline std::mt19937_64 substream(std::uint64_t root, std::uint64_t stream) {
  return std::mt19937_64(mix64(root + 0x9E3779B97F4A7C15ull * (stream + 1)));
}

// Disjoint stream ranges per consumer of one root seed, so e.g. restart 0
// and fold shuffle 0 never share a generator.
namespace stream_domain {
inline constexpr std::uint64_t kRestart = 0;
inline constexpr std::uint64_t kFold = 1ull << 32;
inline constexpr std::uint64_t kPpc = 2ull << 32;
inline constexpr std::uint64_t kGenerator = 3ull << 32;
}  // namespace stream_domain

}  // namespace piham
