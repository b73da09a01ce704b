#ifndef SPVI_RNG_HPP
#define SPVI_RNG_HPP

#include <cstdint>
#include <random>

namespace spvi {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent generator for draw `k` of iteration `iter` under `seed`.
/// Streams depend only on the triple, so results do not depend on which
/// thread evaluates which draw.
inline Rng substream(std::uint64_t seed, std::uint64_t iter, std::uint64_t k) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ iter);
  h = splitmix64(h ^ (k + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                    static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(iter)};
  return Rng(seq);
}

}  // namespace spvi

#endif  // SPVI_RNG_HPP
