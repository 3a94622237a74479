// random.hpp -- seeded PRNG for reproducible Monte Carlo runs.
//
// xoshiro256** with splitmix64 seeding. All samplers are implemented here
// rather than via <random> distributions so that a (config, seed) pair
// produces bit-identical streams independent of the standard library build.

#pragma once

#include <cstdint>
#include <cmath>

#include "atomsim/units.hpp"

namespace atomsim {

class Rng {
public:
    explicit Rng(uint64_t seed = 1) { reseed(seed); }

    void reseed(uint64_t seed) {
        // splitmix64 expansion of the seed into the xoshiro state
        uint64_t x = seed;
        for (auto& s : state_) {
            x += 0x9E3779B97F4A7C15ull;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
            z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
            s = z ^ (z >> 31);
        }
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

    bool bernoulli(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return uniform() < p;
    }

    /// Standard normal via Box-Muller (no caching, two uniforms per draw).
    double gaussian() {
        double u1 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * units::kPi * u2);
    }

    double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

    /// Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return n ? next_u64() % n : 0; }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t state_[4]{};
};

/// Derive an independent stream for run `index` of a sweep or seed batch.
inline Rng substream(uint64_t base_seed, uint64_t index) {
    return Rng(base_seed * 0x9E3779B97F4A7C15ull + index * 0xD1B54A32D192ED03ull + 1);
}

}  // namespace atomsim
