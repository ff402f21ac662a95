#pragma once

#include <cstdint>
#include <random>

namespace byzcd {

using Rng = std::mt19937_64;

// Independent streams inside one replication. Honest observations never share
// a stream with adversary draws, so honest paths are identical across
// adversaries and rules run on the same seed.
enum class Stream : std::uint64_t {
  honest = 1,
  adversary = 2,
  auxiliary = 3,
};

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index) noexcept {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ static_cast<std::uint64_t>(stream));
  return splitmix64(s ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

/// Deterministic substream for replication `index` of a run seeded with `seed`.
inline Rng substream(std::uint64_t seed, Stream stream, std::uint64_t index) {
  return Rng{derive_seed(seed, stream, index)};
}

}  // namespace byzcd
