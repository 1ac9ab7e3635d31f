#include <cmath>
#include <sstream>

#include "doctest.h"
#include "lwave/errors.hpp"
#include "lwave/evolution.hpp"
#include "lwave/random.hpp"

using namespace lwave;

namespace {

LatticeField single(double v) { return LatticeField::delta({0, 0}, v, 0); }

// Free v(t, 0) for f = delta_0 from the discrete Fourier sum on an n x n torus; the lattice wave has not
// wrapped around the torus by time t when n >> t.
double torus_origin(double t, int n) {
    double s = 0.0;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            s += propagator_symbol(t, symbol_eval(2.0 * kPi * (a + 0.5) / n, 2.0 * kPi * (b + 0.5) / n));
    return s / (static_cast<double>(n) * n);
}

double max_abs(const Trajectory& tr) {
    double m = 0.0;
    for (cplx v : tr.values) m = std::max(m, std::abs(v));
    return m;
}

} // namespace

TEST_SUITE("evolution") {

TEST_CASE("propagator symbol continues through lambda = 0") {
    CHECK(propagator_symbol(2.0, 0.0) == doctest::Approx(2.0));
    CHECK(propagator_symbol(2.0, 4.0) == doctest::Approx(std::sin(4.0) / 2.0));
    CHECK(propagator_symbol(2.0, -4.0) == doctest::Approx(std::sinh(4.0) / 2.0));
    CHECK(propagator_symbol(2.0, 1e-14) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("free evolution matches the torus oracle") {
    EvolutionConfig c;
    c.q = LatticeField(0);
    c.f = single(1.0);
    c.horizon = 5.0;
    c.sample_times = {1.0, 5.0};
    c.richardson_levels = 3;
    const Trajectory d = evolve_direct(c);
    const Trajectory ch = evolve_chebyshev(c);
    for (std::size_t i = 0; i < 2; ++i) {
        const double o = torus_origin(c.sample_times[i], 128);
        CHECK(std::abs(d(i, 0).real() - o) < 1e-9);
        CHECK(std::abs(ch(i, 0).real() - o) < 1e-12);
    }
}

TEST_CASE("property: direct and Chebyshev agree for random potentials and data") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        EvolutionConfig c;
        c.q = random_field(seed, 3.0, 1);
        c.f = random_field(seed + 10, 1.0, 1);
        c.horizon = 4.0;
        c.sample_times = {1.5, 4.0};
        c.richardson_levels = 3;
        const auto diff = relative_difference(evolve_direct(c), evolve_chebyshev(c));
        for (double d : diff) CHECK(d < 1e-7);
    }
}

TEST_CASE("spectral reconstruction agrees with time stepping") {
    EvolutionConfig c;
    c.q = single(3.0);
    c.f = single(1.0);
    c.horizon = 8.0;
    c.sample_times = {2.0, 8.0};
    c.richardson_levels = 3;
    const ScatteringProblem p(c.q, 0);
    const Trajectory s = evolve_spectral(p, find_discrete_spectrum(p), spectral_density(p, LambdaGrid::graded()), c.f,
                                         {{0, 0}}, c.sample_times);
    c.probes = {{0, 0}};
    for (double d : relative_difference(evolve_direct(c), s)) CHECK(d < 1e-5);
}

TEST_CASE("property: leapfrog conserves the staggered energy") {
    EvolutionConfig c;
    c.q = random_field(4, 2.0, 1);
    for (cplx& v : c.q.values()) v += 2.5;  // H > 0: the energy is a norm
    c.f = random_field(5, 1.0, 1);
    c.horizon = 20.0;
    c.dt_out = 0.5;
    c.record_energy = true;
    const Trajectory tr = evolve_direct(c);
    REQUIRE(tr.energy.size() == tr.times.size());
    for (double e : tr.energy) CHECK(std::abs(e - tr.energy.front()) <= 1e-11 * std::abs(tr.energy.front()));
}

TEST_CASE("property: linearity in the initial data") {
    EvolutionConfig a;
    a.q = single(-2.0);
    a.horizon = 3.0;
    a.f = LatticeField::delta({1, 0}, 1.0, 1);
    EvolutionConfig b = a;
    b.f = LatticeField::delta({0, -1}, 2.0, 1);
    EvolutionConfig sum = a;
    sum.f = a.f + b.f;
    const Trajectory ta = evolve_direct(a), tb = evolve_direct(b), ts = evolve_direct(sum);
    for (std::size_t i = 0; i < ts.values.size(); ++i) CHECK(std::abs(ts.values[i] - ta.values[i] - tb.values[i]) < 1e-12);
}

TEST_CASE("complex initial data evolves real and imaginary parts separately") {
    EvolutionConfig c;
    c.q = single(1.0);
    c.horizon = 2.0;
    c.f = LatticeField::delta({0, 0}, 1.0, 0);
    c.f.set({0, 0}, cplx(1.0, -0.5));
    EvolutionConfig r = c;
    r.f.set({0, 0}, 1.0);
    const Trajectory tc = evolve_direct(c), tr = evolve_direct(r);
    for (std::size_t i = 0; i < tc.values.size(); ++i)
        CHECK(std::abs(tc.values[i] - cplx(1.0, -0.5) * tr.values[i]) < 1e-13);
}

TEST_CASE("zero horizon gives zeros") {
    EvolutionConfig c;
    c.q = single(-5.0);
    c.f = single(1.0);
    c.horizon = 0.0;
    const Trajectory d = evolve_direct(c);
    REQUIRE(d.times.size() == 1);
    CHECK(max_abs(d) == 0.0);
    CHECK(max_abs(evolve_chebyshev(c)) == 0.0);
}

TEST_CASE("deflation removes the growing mode") {
    EvolutionConfig c;
    c.q = single(-5.0);
    c.f = single(1.0);
    c.horizon = 40.0;
    c.dt_out = 0.5;
    const ScatteringProblem p(c.q, 0);
    c.deflate_lambdas = {find_discrete_spectrum(p).negatives[0].lambda};
    const Trajectory tr = evolve_direct(c);
    CHECK(max_abs(tr) < 2.0);
    CHECK(tr.deflated_lambdas.size() == 1);
}

TEST_CASE("a window too small for the horizon is reported") {
    EvolutionConfig c;
    c.q = LatticeField(0);
    c.f = single(1.0);
    c.horizon = 30.0;
    c.window_radius = 12;
    CHECK_THROWS_AS(evolve_direct(c), BoundaryContamination);
}

TEST_CASE("contract violations") {
    EvolutionConfig c;
    c.q = single(1.0);
    c.f = single(1.0);
    c.horizon = -1.0;
    CHECK_THROWS_AS(evolve_direct(c), ContractViolation);
    c.horizon = 1.0;
    c.dt_out = 1.0;
    CHECK_THROWS_AS(evolve_direct(c), ContractViolation);
    CHECK_THROWS_AS(chebyshev_coefficients(1000.0, 0.0, 8.0, 100), DegreeCapReached);
}

TEST_CASE("trajectories round-trip through CSV") {
    EvolutionConfig c;
    c.q = single(2.0);
    c.f = LatticeField::delta({0, 1}, 1.0, 1);
    c.horizon = 1.0;
    const Trajectory tr = evolve_direct(c);
    std::stringstream ss;
    tr.write_csv(ss);
    CHECK(ss.str().rfind("t, xi1, xi2, re, im\n", 0) == 0);
    const Trajectory back = Trajectory::read_csv(ss);
    CHECK(back.times == tr.times);
    CHECK(back.probes == tr.probes);
    CHECK(back.values == tr.values);
}

}
