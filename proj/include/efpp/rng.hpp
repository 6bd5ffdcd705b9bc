#pragma once

#include <cstdint>
#include <cmath>
#include <stdexcept>

namespace efpp {

// Counter-based substreams.
//
// All randomness in this project is drawn from keyed counter streams so that
// replicate r of an experiment with seed s is reproducible regardless of
// scheduling.  The derivation is deliberately simple so an independent
// implementation can replay it:
//
//   mix64(z): the SplitMix64 finalizer
//   key(seed, stream) = mix64(mix64(seed) + GAMMA * (stream + 1))
//   draw i            = mix64(key + GAMMA * (i + 1)),  i = 0, 1, 2, ...
//   uniform in [0,1)  = (draw >> 11) * 2^-53
//
// Poisson counts use sequential inversion for mean <= 50 and Hormann's
// transformed-rejection method (PTRS) above, consuming uniforms from the
// stream in order.

inline constexpr std::uint64_t kRngGamma = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

inline std::uint64_t substream_key(std::uint64_t seed, std::uint64_t stream) {
    return mix64(mix64(seed) + kRngGamma * (stream + 1));
}

class Substream {
public:
    Substream(std::uint64_t seed, std::uint64_t stream)
        : key_(substream_key(seed, stream)) {}

    std::uint64_t next_u64() { return mix64(key_ + kRngGamma * (++counter_)); }

    /// Uniform in [0,1).
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * next_uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    /// Standard normal via Box-Muller (consumes two uniforms).
    double next_normal() {
        double u1 = next_uniform();
        while (u1 <= 0.0) u1 = next_uniform();
        const double u2 = next_uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.2831853071795864769 * u2);
    }

    std::uint64_t poisson(double mean) {
        if (!(mean >= 0.0)) throw std::invalid_argument("poisson: mean must be >= 0");
        if (mean == 0.0) return 0;
        return mean <= 50.0 ? poisson_inversion(mean) : poisson_ptrs(mean);
    }

private:
    std::uint64_t poisson_inversion(double mean) {
        const double u = next_uniform();
        double p = std::exp(-mean);
        double cum = p;
        std::uint64_t k = 0;
        while (u > cum) {
            ++k;
            p *= mean / static_cast<double>(k);
            cum += p;
            if (p <= 0.0) break; // underflow guard; unreachable for mean <= 50
        }
        return k;
    }

    // Hormann (1993), transformed rejection with squeeze (PTRS), valid for mean >= 10.
    std::uint64_t poisson_ptrs(double mean) {
        const double slam = std::sqrt(mean);
        const double loglam = std::log(mean);
        const double b = 0.931 + 2.53 * slam;
        const double a = -0.059 + 0.02483 * b;
        const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
        const double vr = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            const double u = next_uniform() - 0.5;
            const double v = next_uniform();
            const double us = 0.5 - std::fabs(u);
            const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(kf);
            if (kf < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
                kf * loglam - mean - std::lgamma(kf + 1.0)) {
                return static_cast<std::uint64_t>(kf);
            }
        }
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace efpp
