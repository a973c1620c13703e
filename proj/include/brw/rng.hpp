#pragma once

#include <cstdint>
#include <random>

namespace brw {

using Stream = std::mt19937_64;

/// SplitMix64 step: advances `state` and returns the next output.
inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stateless 64-bit finalizer.
inline std::uint64_t mix64(std::uint64_t x) noexcept {
  std::uint64_t s = x;
  return splitmix64(s);
}

/// Seed for replica `index` under `master`. Distinct indices give unrelated streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Key of the `index`-th child of the node keyed `parent`.
/// The whole tree is a pure function of the root key, so pruning or traversal
/// order never changes the realization.
inline std::uint64_t child_key(std::uint64_t parent, std::uint64_t index) noexcept {
  return mix64(parent * 0xd1342543de82ef95ULL + index + 1);
}

inline Stream make_stream(std::uint64_t master, std::uint64_t index) {
  return Stream(derive_seed(master, index));
}

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Stream& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform on [0, 1) from a node key, without touching any stream.
inline double key_uniform(std::uint64_t key) noexcept {
  return static_cast<double>(mix64(key ^ 0x5851f42d4c957f2dULL) >> 11) * 0x1.0p-53;
}

}  // namespace brw
