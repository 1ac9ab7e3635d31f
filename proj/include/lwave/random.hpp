#pragma once

// Seeded 64-bit linear congruential generator for reproducible random potentials.
// x <- 6364136223846793005 x + 1442695040888963407 (mod 2^64); u = (x >> 11) 2^-53 in [0, 1).

#include <cstdint>

#include "lwave/lattice.hpp"

namespace lwave {

class Lcg64 {
public:
    explicit Lcg64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ = 6364136223846793005ULL * state_ + 1442695040888963407ULL;
        return state_;
    }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    /// Uniform on [-amplitude, amplitude).
    double symmetric(double amplitude) { return amplitude * (2.0 * uniform() - 1.0); }

private:
    std::uint64_t state_;
};

/// Real field on the square of half-width m, one draw per site in SupportSquare order.
inline LatticeField random_field(std::uint64_t seed, double amplitude, int m) {
    Lcg64 rng(seed);
    LatticeField f(m);
    for (cplx& v : f.values()) v = rng.symmetric(amplitude);
    return f;
}

} // namespace lwave
