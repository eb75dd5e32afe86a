#pragma once

#include <cmath>
#include <cstdint>

namespace sino {

inline uint64_t splitmix64(uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Small deterministic generator (xoshiro256**). Used instead of std
/// distributions so output is identical across standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed)
    {
        uint64_t s = seed;
        for (auto& w : s_) w = (s = splitmix64(s));
    }
    /// Counter-based construction: independent stream per (seed, counter).
    Rng(uint64_t seed, uint64_t counter) : Rng(splitmix64(seed) ^ splitmix64(counter * 0x9e3779b97f4a7c15ULL + 1)) {}

    uint64_t next_u64()
    {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
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

    /// Uniform integer in [0, n).
    long uniform_int(long n) { return static_cast<long>(next_u64() % static_cast<uint64_t>(n)); }

    double normal()
    {
        // Box-Muller; one value per call keeps the stream simple.
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    /// Poisson sample; Knuth for small mean, PTRS transformed rejection above.
    long poisson(double lambda)
    {
        if (lambda <= 0.0) return 0;
        if (lambda < 30.0) return poisson_knuth(lambda);
        return poisson_ptrs(lambda);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    long poisson_knuth(double lambda)
    {
        const double limit = std::exp(-lambda);
        long n = 0;
        double prod = uniform();
        while (prod > limit) {
            ++n;
            prod *= uniform();
        }
        return n;
    }

    // Hormann's PTRS algorithm, exact for lambda >= ~10.
    long poisson_ptrs(double lambda)
    {
        const double slam = std::sqrt(lambda);
        const double loglam = std::log(lambda);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            const double u = uniform() - 0.5;
            const double v = uniform();
            const double us = 0.5 - std::fabs(u);
            const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
            if (us >= 0.07 && v <= vr) return static_cast<long>(k);
            if (k < 0 || (us < 0.013 && v > us)) continue;
            if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
                k * loglam - lambda - std::lgamma(k + 1.0))
                return static_cast<long>(k);
        }
    }

    uint64_t s_[4];
};

}  // namespace sino
