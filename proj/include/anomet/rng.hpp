#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace anomet {

// Deterministic random source. mt19937_64 output is fully specified by the
// standard, and every draw below is explicit arithmetic on it, so sequences
// are reproducible across standard-library implementations. The std
// distribution adapters are implementation-defined and deliberately avoided.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    // Uniform in [0, 1), 53 random bits.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal, Box-Muller with a cached spare.
    double gauss() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform01(); // (0, 1], keeps log finite
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * kPi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Uniform integer in [0, n), unbiased via threshold rejection.
    uint64_t below(uint64_t n) {
        uint64_t threshold = (0 - n) % n;
        uint64_t x = gen_();
        while (x < threshold) x = gen_();
        return x % n;
    }

    uint64_t raw() { return gen_(); }

private:
    static constexpr double kPi = 3.14159265358979323846;
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace anomet
