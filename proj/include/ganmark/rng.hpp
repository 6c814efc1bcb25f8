#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace ganmark {

// Seeded random stream. All draws are implemented on top of raw 64-bit
// output so that a given seed produces the same sequence on every platform.
// Not shareable between concurrent consumers; derive one stream per worker
// with split().
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), gen_(seed) {}

    uint64_t seed() const { return seed_; }

    // Documented split rule: worker stream seed = parent seed XOR worker index.
    Rng split(uint64_t worker_index) const { return Rng(seed_ ^ worker_index); }

    uint64_t next_u64() { return gen_(); }

    // uniform in [0,1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [lo, hi] inclusive
    int uniform_int(int lo, int hi) {
        if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
        uint64_t span = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    // standard normal via Box-Muller (no cached spare, keeps the stream simple)
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

private:
    uint64_t seed_;
    std::mt19937_64 gen_;
};

}  // namespace ganmark
