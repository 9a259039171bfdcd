#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace adasamp {

/// Deterministic counter-splittable random source (SplitMix64 core).
///
/// All randomness in the library flows through this class so that runs are
/// reproducible bit-for-bit from a single master seed. Child streams are
/// derived by hashing (seed, key...) rather than by drawing from the parent,
/// so adding a consumer never perturbs the draws of existing ones.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(mix(seed + kGolden)) {}

    std::uint64_t next_u64() {
        state_ += kGolden;
        return mix(state_);
    }

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    /// Uniform integer in [0, n), n >= 1. Lemire multiply-shift reduction.
    int uniform_int(int n) {
        const auto x = next_u64();
        return static_cast<int>((static_cast<unsigned __int128>(x) *
                                 static_cast<unsigned __int128>(n)) >> 64);
    }

    /// Standard normal draw via Box-Muller (one draw per uniform pair, no
    /// cached twin, so the call sequence alone determines the stream).
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Child stream for a fixed key; independent of draws made on *this*.
    Rng split(std::uint64_t key) const {
        return Rng(mix(origin_ ^ mix(key + kGolden)));
    }

private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
    static constexpr double kPi = 3.141592653589793238462643383279502884;

    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_;
    std::uint64_t origin_ = state_;
};

/// Hash-combine a master seed with a path of stream keys.
inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = seed;
    for (std::uint64_t k : path) {
        h ^= k + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
        // splitmix-style finalize per level
        h ^= h >> 30;
        h *= 0xBF58476D1CE4E5B9ull;
        h ^= h >> 27;
        h *= 0x94D049BB133111EBull;
        h ^= h >> 31;
    }
    return h;
}

/// FNV-1a for deriving stream keys from role names.
inline std::uint64_t stream_key(const char* name) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const char* p = name; *p; ++p) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(*p));
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace adasamp
