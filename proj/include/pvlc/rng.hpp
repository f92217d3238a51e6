#ifndef PVLC_RNG_HPP
#define PVLC_RNG_HPP

#include <bit>
#include <cstdint>
#include <random>

/// Reproducible random streams.
///
/// Every simulation run owns a 64-bit seed. Independent streams for the
/// payload, the training sequence and the receiver noise are derived from it
/// with mix64(seed, stream), and each stream drives its own std::mt19937_64.
/// Sweep points derive their seed from the base seed and the point's
/// coordinates, so adding grid points never changes existing ones.
namespace pvlc::rng {

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t seed, std::uint64_t key) noexcept {
    return splitmix64(seed ^ splitmix64(key));
}

enum class Stream : std::uint64_t { payload = 0, training = 1, noise = 2 };

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, Stream stream) {
    return Engine(mix64(seed, static_cast<std::uint64_t>(stream)));
}

/// Seed of one (tx illuminance, modulation index, repetition) point.
/// DCL illuminance is not part of the key, so a DCL sweep reuses the same
/// payload and noise draws along its axis.
inline std::uint64_t point_seed(std::uint64_t base, double tx_dc_lux, double mod_index,
                                std::uint64_t repetition) {
    std::uint64_t s = mix64(base, repetition);
    s = mix64(s, std::bit_cast<std::uint64_t>(tx_dc_lux));
    return mix64(s, std::bit_cast<std::uint64_t>(mod_index));
}

}  // namespace pvlc::rng

#endif
