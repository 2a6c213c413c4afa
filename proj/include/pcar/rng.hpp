#pragma once

// Random streams used across the simulator.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. The distributions in <random> are not, so the draws below are
// written out explicitly; a seed therefore produces the same decisions on
// every conforming toolchain.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace pcar {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Stable sub-seed derivation: hash64(seed, stream) = mix64(mix64(seed) ^ stream).
/// Adding streams never perturbs existing ones.
constexpr std::uint64_t hash64(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix64(mix64(seed) ^ stream);
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Engine& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n). n must be positive.
inline std::uint64_t uniform_index(Engine& rng, std::uint64_t n) {
    const std::uint64_t limit = Engine::max() - (Engine::max() % n);
    std::uint64_t x = rng();
    while (x >= limit) x = rng();
    return x % n;
}

inline bool bernoulli(Engine& rng, double p) {
    return uniform01(rng) < p;
}

/// Standard normal via Box-Muller; consumes exactly two engine outputs.
inline double standard_normal(Engine& rng) {
    const double u1 = 1.0 - uniform01(rng);  // (0, 1]
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double normal(Engine& rng, double mean, double sigma) {
    return mean + sigma * standard_normal(rng);
}

}  // namespace pcar
