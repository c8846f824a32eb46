#pragma once

#include <cmath>
#include <cstdint>

namespace dmot {

/// Deterministic PRNG (xoshiro256++) with explicit samplers, so runs are
/// reproducible independent of the standard library's distribution
/// implementations. Substreams are derived with splitmix64 so that robots
/// and noise sources draw from independent sequences.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& word : s_) word = splitmix64(x);
    }

    /// Independent substream keyed by (seed, key). Keys must be distinct per
    /// purpose; reordering draws inside one stream never affects another.
    static Rng substream(uint64_t seed, uint64_t key) {
        uint64_t x = seed;
        const uint64_t a = splitmix64(x);
        uint64_t y = key ^ 0x9e3779b97f4a7c15ULL;
        const uint64_t b = splitmix64(y);
        return Rng(a ^ (b * 0xff51afd7ed558ccdULL));
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller.
    double gauss() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        constexpr double two_pi = 6.28318530717958647692;
        spare_ = mag * std::sin(two_pi * u2);
        have_spare_ = true;
        return mag * std::cos(two_pi * u2);
    }

    double gauss(double sigma) { return sigma * gauss(); }

    /// Poisson sample, Knuth's method (fine for the small rates used here).
    int poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        const double limit = std::exp(-lambda);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    static uint64_t splitmix64(uint64_t& state) {
        state += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    uint64_t s_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace dmot
