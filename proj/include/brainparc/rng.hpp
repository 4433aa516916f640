#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace brainparc {

// splitmix64 finalizer; bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from a base seed and a stream index.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
    return mix64(mix64(base) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

/// Counter-based randomness: a hash of (seed, a, b, lane) so results never
/// depend on evaluation order or thread count.
constexpr std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                                     std::uint64_t lane = 0) noexcept {
    return mix64(mix64(mix64(seed ^ (lane * 0xd6e8feb86659fd93ULL)) ^ a) ^ b);
}

/// Uniform in [0, 1) with 53 random bits.
constexpr double to_unit(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller from two counter-hash lanes.
inline double counter_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
    const double u1 = 1.0 - to_unit(counter_hash(seed, a, b, 1));  // (0, 1]
    const double u2 = to_unit(counter_hash(seed, a, b, 2));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace brainparc
