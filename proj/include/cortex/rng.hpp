#pragma once

#include <cmath>
#include <cstdint>

namespace cortex {

// splitmix64 with an explicit Box-Muller transform. std::normal_distribution
// is implementation-defined, so weight init goes through this generator to
// keep (config, seed) -> weights reproducible across standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    uint64_t next_below(uint64_t n) { return next_u64() % n; }

    double next_gaussian(double mean, double stddev) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + spare_ * stddev;
        }
        // 1 - u keeps the argument of log in (0, 1].
        const double u1 = 1.0 - next_unit();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return mean + r * std::cos(a) * stddev;
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace cortex
