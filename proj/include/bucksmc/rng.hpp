#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bucksmc {

/// splitmix64 step, used to derive independent seeds from a root seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic per-stream seed for (root, a, b), e.g. (seed, generation,
/// attempt index). Concurrent workers drawing from distinct streams see the
/// same randomness regardless of scheduling.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = root;
    std::uint64_t h = splitmix64(s);
    s = h ^ (a * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
    h = splitmix64(s);
    s = h ^ (b * 0x9e3779b97f4a7c15ULL + 1ULL);
    return splitmix64(s);
}

/// Seeded generator with explicit, platform-independent draw formulas.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    /// Uniform draw in [0, 1).
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double low, double high) { return low + uniform01() * (high - low); }

    /// Standard normal via Box-Muller; one fresh pair per call.
    double normal() {
        const double u1 = 1.0 - uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    std::uint64_t raw() { return eng_(); }

private:
    std::mt19937_64 eng_;
};

} // namespace bucksmc
