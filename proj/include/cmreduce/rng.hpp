#ifndef CMREDUCE_RNG_HPP
#define CMREDUCE_RNG_HPP

#include <cstdint>
#include <random>

#include "cmreduce/constellation.hpp"

namespace cmr {

/// SplitMix64 finalizer; full-avalanche 64-bit mix.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Per-symbol seed derived from (master_seed, symbol index). Fixed splitting
/// rule so parallel execution cannot reorder the per-symbol randomness:
/// seed_i = splitmix64(master ^ splitmix64(i + 1)).
constexpr std::uint64_t per_symbol_seed(std::uint64_t master_seed, std::uint64_t index) {
    return splitmix64(master_seed ^ splitmix64(index + 1));
}

/// Unbiased uniform index into a power-of-two sized point set.
/// Constellation invariants guarantee power-of-two sizes.
inline std::size_t uniform_point_index(std::mt19937_64& rng, std::size_t set_size) {
    return static_cast<std::size_t>(rng()) & (set_size - 1);
}

inline int uniform_sign(std::mt19937_64& rng) {
    return (rng() & 1u) ? -1 : +1;
}

/// Draws one frame: indices < n_fixed uniformly from the full constellation,
/// the rest uniformly from the half constellation.
inline std::vector<cxd> draw_frame(const Constellation& full, const HalfConstellation& half,
                                   std::size_t n, std::size_t n_fixed, std::mt19937_64& rng) {
    std::vector<cxd> frame(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (k < n_fixed) {
            frame[k] = full.points[uniform_point_index(rng, full.points.size())];
        } else {
            frame[k] = half.points[uniform_point_index(rng, half.points.size())];
        }
    }
    return frame;
}

/// Uniform +/-1 signs on indices >= n_fixed; +1 on the fixed prefix.
inline std::vector<int> draw_signs(std::size_t n, std::size_t n_fixed, std::mt19937_64& rng) {
    std::vector<int> signs(n, +1);
    for (std::size_t k = n_fixed; k < n; ++k) {
        signs[k] = uniform_sign(rng);
    }
    return signs;
}

} // namespace cmr

#endif
