#pragma once
// Stream addressing on top of the counter-based generator. Draws are pure
// functions of (seed, domain, replicate, step, coordinate), so replicates and
// workers never share mutable state.

#include <cstdint>
#include <span>

#include "anneal/philox.hpp"

namespace anneal {

enum class Domain : uint32_t {
  path_noise = 1,
  pi0 = 2,
  frozen = 3,
  stationary = 4,
  bootstrap = 5,
  is_sample = 6,
  trial_points = 7,
  control = 8,
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

// Single scalar draws; hot paths use kernels::normal_pairs directly.
inline double normal_at(uint64_t seed, Domain dom, uint32_t replicate, uint32_t step,
                        uint32_t coord) {
  const rngcore::Ctr c{{step, coord >> 1, replicate, static_cast<uint32_t>(dom)}};
  double z0, z1;
  rngcore::block_normals(c, rngcore::key_from_seed(seed), z0, z1);
  return (coord & 1u) ? z1 : z0;
}

inline double uniform_at(uint64_t seed, Domain dom, uint32_t replicate, uint32_t step,
                         uint32_t coord) {
  const rngcore::Ctr c{{step, coord >> 1, replicate, static_cast<uint32_t>(dom)}};
  double u0, u1;
  rngcore::block_uniforms(c, rngcore::key_from_seed(seed), u0, u1);
  return (coord & 1u) ? u1 : u0;
}

inline void fill_normals(uint64_t seed, Domain dom, uint32_t replicate, uint32_t step,
                         std::span<double> out) {
  for (uint32_t j = 0; j < out.size(); j += 2) {
    const rngcore::Ctr c{{step, j >> 1, replicate, static_cast<uint32_t>(dom)}};
    double z0, z1;
    rngcore::block_normals(c, rngcore::key_from_seed(seed), z0, z1);
    out[j] = z0;
    if (j + 1 < out.size()) out[j + 1] = z1;
  }
}

inline uint32_t index_at(uint64_t seed, Domain dom, uint32_t replicate, uint32_t step,
                         uint32_t coord, uint32_t bound) {
  const double u = uniform_at(seed, dom, replicate, step, coord);
  auto idx = static_cast<uint32_t>(u * bound);
  return idx < bound ? idx : bound - 1;
}

} // namespace anneal
