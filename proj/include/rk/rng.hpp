#pragma once

#include <cstdint>
#include <cmath>
#include <random>

namespace rk {

/// Deterministic generator built on mt19937_64. Uniform draws are formed from
/// raw bits so results do not depend on the standard library's distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    /// Independent child stream: splitmix64 of (seed, stream id).
    static Rng stream(std::uint64_t seed, std::uint64_t id) { return Rng(split(seed, id)); }

    static std::uint64_t split(std::uint64_t seed, std::uint64_t id) {
        std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (id + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t next() { return eng_(); }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller on raw uniforms.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(6.283185307179586 * u2);
        has_spare_ = true;
        return r * std::cos(6.283185307179586 * u2);
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace rk
