#pragma once

#include <cstdint>
#include <array>

// Deterministic random number streams.
//
// Reproducibility across platforms and worker schedules is a hard contract of
// this library, so we use fixed-bit generators (splitmix64 for seeding,
// xoshiro256** for the streams) instead of std:: distributions, whose output
// is not specified bit-for-bit by the standard.

namespace pinlab {

/// One step of splitmix64 (Steele, Lea & Flood 2014). Advances `state`.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// xoshiro256** 1.0 (Blackman & Vigna 2018), seeded through splitmix64.
class RngStream {
  public:
    using result_type = std::uint64_t;

    explicit RngStream(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64_next(sm);
    }

    /// Stream for one Monte Carlo replica: a documented, splittable function
    /// of (master seed, replica index). Replica indices map to well separated
    /// splitmix64 seeds, so any worker can own any replica independently.
    static RngStream for_replica(std::uint64_t master_seed, std::uint64_t replica) {
        std::uint64_t key = master_seed + 0x9E3779B97F4A7C15ULL * (replica + 1);
        return RngStream(splitmix64_next(key));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0,1), 53 significant bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in the open interval (0,1); safe for inverse-CDF tails.
    double next_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// UniformRandomBitGenerator interface.
    std::uint64_t operator()() { return next_u64(); }
    static constexpr std::uint64_t min() { return 0; }
    static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::array<std::uint64_t, 4> s_{};
};

} // namespace pinlab
