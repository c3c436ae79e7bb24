#pragma once

#include <cstdint>
#include <random>

namespace trapscore::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent stream for replicate/fold `stream` of a run seeded with `seed`.
inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t stream_index) {
    return std::mt19937_64(splitmix64(seed + stream_index));
}

// Uniform integer in [0, n) by rejection; unlike std::uniform_int_distribution
// the sequence is the same on every standard library.
inline std::uint64_t uniform_index(std::mt19937_64& g, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do x = g();
    while (x >= limit);
    return x % n;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

}  // namespace trapscore::rng
