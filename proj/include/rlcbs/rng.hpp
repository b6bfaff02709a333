#pragma once

#include <cstdint>
#include <random>

namespace rlcbs {

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Top 53 bits mapped to [0, 1). Unlike std::uniform_real_distribution this mapping is
/// fixed, so seeded tables come out the same on every standard library.
[[nodiscard]] constexpr double unit_double(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

[[nodiscard]] inline double next_unit(std::mt19937_64& rng) { return unit_double(rng()); }

/// Uniform integer in [0, n) by rejection, independent of the library's distributions.
[[nodiscard]] inline std::uint64_t next_below(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r = rng();
    while (r >= limit) {
        r = rng();
    }
    return r % n;
}

}  // namespace rlcbs
