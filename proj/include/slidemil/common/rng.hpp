#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace slidemil {

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a base seed and a tag path, e.g.
/// derive_seed(seed, {tag("cv"), fold}). Pure function of its inputs, so a
/// task's stream never depends on scheduling order.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path);

/// FNV-1a of a short label, for use as a path element in derive_seed.
constexpr std::uint64_t tag(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(base, path));
}

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace slidemil
