#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cvxrobust {

using Rng = std::mt19937_64;

/// Child seed for a named component, so each stochastic step of a run draws
/// from its own stream derived from one root seed.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view component) {
  // FNV-1a over the name, then a splitmix64 finalizer
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char ch : component) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (h | 1ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace cvxrobust
