#pragma once

#include <cstdint>
#include <random>

namespace ivcr {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Engine for stream `stream` of `master_seed`; depends on nothing else, so replicate
/// r draws the same numbers whichever thread runs it.
inline std::mt19937_64 stream_engine(std::uint64_t master_seed, std::uint64_t stream) {
  const std::uint64_t a = splitmix64(master_seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
  const std::uint64_t b = splitmix64(a);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace ivcr
