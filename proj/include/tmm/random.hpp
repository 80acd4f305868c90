#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace tmm {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of episode `index` under `master`; episodes replay in isolation.
constexpr std::uint64_t episode_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Uniform double in [0, 1) from the top 53 bits. Unlike
/// std::uniform_real_distribution this is identical across standard libraries.
inline double uniform01(Rng &rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Inverse-CDF draw from unnormalized-safe weights; falls back to the last
/// positive entry when rounding leaves u above the cumulative sum.
template <typename Weights, typename Proj>
std::size_t sample_index(Rng &rng, const Weights &weights, Proj proj) {
  const double u = uniform01(rng);
  double acc = 0.0;
  std::size_t last_positive = 0;
  std::size_t i = 0;
  for (const auto &w : weights) {
    const double p = proj(w);
    if (p > 0.0) {
      acc += p;
      last_positive = i;
      if (u < acc) return i;
    }
    ++i;
  }
  return last_positive;
}

inline std::size_t sample_index(Rng &rng, std::span<const double> weights) {
  return sample_index(rng, weights, [](double w) { return w; });
}

} // namespace tmm
