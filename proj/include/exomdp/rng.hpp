#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace exomdp {

// xoshiro256++ with a splitmix64 seeding stage. All sampling in the library
// goes through this generator so that identical seeds give bit-identical
// streams independent of the standard library's distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

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

    // Uniform double in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    bool bernoulli(double p) { return next_double() < p; }

    // Index in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

    // Marsaglia polar method; the spare deviate is cached.
    double normal(double mean = 0.0, double stddev = 1.0) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + stddev * spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * next_double() - 1.0;
            v = 2.0 * next_double() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return mean + stddev * u * m;
    }

    // Derive an independent generator for a labelled substream.
    Rng split(std::uint64_t stream) {
        std::uint64_t mix = state_[0] ^ rotl(stream, 31) ^ (stream * 0x9e3779b97f4a7c15ull);
        return Rng(mix ^ next_u64());
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace exomdp
