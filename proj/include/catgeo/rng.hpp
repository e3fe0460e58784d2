#pragma once

#include <cstdint>
#include <random>

namespace catgeo {

using RngEngine = std::mt19937_64;

// splitmix64 finalizer; used to derive independent per-call / per-chunk seeds.
inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t stream) {
  return mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

inline RngEngine make_engine(uint64_t seed, uint64_t stream = 0) {
  return RngEngine(derive_seed(seed, stream));
}

}  // namespace catgeo
