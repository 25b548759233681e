#pragma once

#include <cmath>
#include <cstdint>

namespace imgcot {

// Counter-based splittable RNG. Each draw is a pure function of
// (seed, stream, counter), so initialization is reproducible regardless of
// call order across modules and platforms.
class Rng {
public:
    explicit Rng(uint64_t seed, uint64_t stream = 0)
        : seed_(seed), stream_(stream), counter_(0) {}

    // Derive an independent stream; child draws never collide with the parent.
    Rng split(uint64_t substream) const {
        return Rng(seed_, mix(stream_ ^ 0x9e3779b97f4a7c15ULL, substream));
    }

    uint64_t next_u64() { return mix(mix(seed_, stream_), counter_++); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller (one value per call, cache unused half).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return n ? next_u64() % n : 0; }

private:
    // splitmix64-style finalizer applied to a combined word.
    static uint64_t mix(uint64_t a, uint64_t b) {
        uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    uint64_t seed_;
    uint64_t stream_;
    uint64_t counter_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace imgcot
