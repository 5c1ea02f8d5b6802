#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace eegdiff {

/// splitmix64 mixing step; used for seeding and for deriving stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Stateless variant: hash a 64-bit value.
inline std::uint64_t mix64(std::uint64_t x) {
    return splitmix64(x);
}

/// Deterministic PRNG: xoshiro256++ seeded via splitmix64, Gaussian output
/// via Box-Muller with the second variate cached. Identical seeds give
/// identical streams on every platform; all randomness in the library flows
/// through this generator.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n); n must be positive.
    std::int64_t uniform_int(std::int64_t n) {
        // Rejection sampling to avoid modulo bias.
        const std::uint64_t un = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return static_cast<std::int64_t>(x % un);
    }

    /// Standard normal via Box-Muller; generates pairs, caches the second.
    double gaussian() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

    /// Derived generator for stream `index`: seeds with seed ^ mix64(index).
    /// Outputs are independent of how work is split across threads.
    Rng fork(std::uint64_t index) const {
        return Rng(seed_ ^ mix64(index + 0x9e3779b97f4a7c15ULL));
    }

    /// Deterministic Fisher-Yates shuffle.
    template <typename T>
    void shuffle(T* values, std::int64_t count) {
        for (std::int64_t i = count - 1; i > 0; --i) {
            const std::int64_t j = uniform_int(i + 1);
            T tmp = values[i];
            values[i] = values[j];
            values[j] = tmp;
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4];
    std::uint64_t seed_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace eegdiff
