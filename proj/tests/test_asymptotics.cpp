#include <cmath>

#include "doctest.h"
#include "lwave/asymptotics.hpp"
#include "lwave/errors.hpp"
#include "lwave/random.hpp"

using namespace lwave;

namespace {

Trajectory synthetic(double t0, double t1, double step, double (*signal)(double)) {
    Trajectory tr;
    tr.probes = {{0, 0}};
    tr.method = "synthetic";
    const long n0 = std::lround(t0 / step), n1 = std::lround(t1 / step);
    for (long i = n0; i <= n1; ++i) {
        const double t = static_cast<double>(i) * step;
        tr.times.push_back(t);
        tr.values.push_back(signal(t));
    }
    return tr;
}

double three_channels(double t) {
    return 0.3 / t * std::sin(2.0 * t + 0.7) + 0.1 / t * std::sin(kSqrt8 * t - 0.2) + 0.05 / t;
}

double unbalanced(double t) {
    return 0.3 / t * std::sin(2.0 * t) + 0.03 / t * std::sin(kSqrt8 * t + 1.0) - 0.01 / t;
}

BranchClassification classification(int alpha, int beta) {
    BranchClassification c;
    for (int s = -2; s <= 2; ++s) {
        BranchFit f;
        f.s = s;
        f.alpha = alpha;
        f.beta = beta;
        c.fits.push_back(f);
    }
    return c;
}

} // namespace

TEST_SUITE("asymptotics") {

TEST_CASE("synthetic three-channel signal is recovered") {
    const AsymptoticFit fit = fit_decay_channels(synthetic(50.0, 400.0, 0.05, three_channels), {0, 0});
    const double amp[3] = {0.05, 0.3, 0.1};
    for (std::size_t s = 0; s < 3; ++s) {
        CHECK(fit.channels[s].frequency == doctest::Approx(kChannelFrequencies[s]).epsilon(1e-6));
        CHECK(fit.channels[s].power == doctest::Approx(1.0).epsilon(1e-3));
        CHECK(fit.channels[s].amplitude == doctest::Approx(amp[s]).epsilon(1e-3));
    }
    CHECK(fit.channels[1].phase == doctest::Approx(0.7).epsilon(1e-3));
    CHECK(fit.residual_norm < 1e-8);
    for (double t : {250.0, 333.3}) CHECK(std::abs(fit.model(t) - three_channels(t)) < 1e-8);
}

TEST_CASE("property: fits are deterministic") {
    const Trajectory tr = synthetic(50.0, 400.0, 0.05, three_channels);
    CHECK(fit_decay_channels(tr, {0, 0}).to_json().dump() == fit_decay_channels(tr, {0, 0}).to_json().dump());
}

TEST_CASE("property: exponents do not depend on the window") {
    const Trajectory tr = synthetic(50.0, 400.0, 0.05, three_channels);
    DecayOptions wide;
    wide.window_start = 100.0;
    const AsymptoticFit a = fit_decay_channels(tr, {0, 0}, wide), b = fit_decay_channels(tr, {0, 0});
    for (std::size_t s = 0; s < 3; ++s) CHECK(std::abs(a.channels[s].power - b.channels[s].power) < 2e-3);
}

TEST_CASE("channel leakage stays below one percent of the strongest channel") {
    const AsymptoticFit fit = fit_decay_channels(synthetic(50.0, 400.0, 0.05, unbalanced), {0, 0});
    CHECK(std::abs(fit.channels[0].amplitude - (-0.01)) < 0.01 * 0.3);
    CHECK(std::abs(fit.channels[2].amplitude - 0.03) < 0.01 * 0.3);
    CHECK(fit.channels[1].amplitude == doctest::Approx(0.3).epsilon(1e-3));
}

TEST_CASE("short windows are refused") {
    CHECK_THROWS_AS(fit_decay_channels(synthetic(1.0, 40.0, 0.05, three_channels), {0, 0}), FitFailure);
}

TEST_CASE("demodulation of a pure tone") {
    const Trajectory tr = synthetic(0.0, 200.0, 0.05, [](double t) { return 0.5 * std::cos(2.0 * t) + 0.1; });
    std::vector<double> v;
    for (cplx x : tr.values) v.push_back(x.real());
    const Envelope e = demodulate(tr.times, v, 2.0, 40.0);
    REQUIRE(!e.values.empty());
    CHECK(e.times.front() >= 20.0 - 1e-9);
    for (std::size_t i = 0; i < e.values.size(); i += 101) CHECK(std::abs(e.values[i]) == doctest::Approx(0.25).epsilon(1e-3));
}

TEST_CASE("leapfrog mode kernel reproduces scalar leapfrog") {
    for (double lambda : {2.0, 9.5, -1.5}) {
        const double dt = 0.025;
        double p = 1.0, v = 0.0;
        for (int n = 0; n < 400; ++n) {
            p -= dt * lambda * v;
            v += dt * p;
        }
        CHECK(mode_kernel(lambda, 10.0, dt, 1) == doctest::Approx(v).epsilon(1e-11));
    }
    CHECK(mode_kernel(-1.5, 10.0, 0.0, 0) == doctest::Approx(std::sinh(10.0 * std::sqrt(1.5)) / std::sqrt(1.5)));
    // Richardson depth 3 is fourth-order accurate in dt.
    CHECK(std::abs(mode_kernel(2.0, 10.0, 0.025, 3) - propagator_symbol(10.0, 2.0)) < 1e-8);
}

TEST_CASE("discrete terms are stripped exactly") {
    const double sigma = 1.2, c = 0.37;
    DiscreteSpectrum spec;
    spec.m = 0;
    Eigenvalue e;
    e.lambda = -sigma * sigma;
    e.rate = sigma;
    e.projection = MatrixC::Constant(1, 1, c);
    spec.negatives.push_back(e);
    Lcg64 noise(3);
    Trajectory tr = synthetic(0.0, 10.0, 0.05, [](double) { return 0.0; });
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const double t = tr.times[i];
        tr.values[i] = c * std::sinh(sigma * t) / sigma + 0.01 * std::sin(2.0 * t) / (1.0 + t) + 1e-8 * noise.symmetric(1.0);
    }
    const Trajectory out = strip_discrete(tr, spec, LatticeField::delta({0, 0}, 1.0, 0));
    for (std::size_t i = 0; i < out.times.size(); ++i) {
        const double t = out.times[i];
        CHECK(std::abs(out.values[i] - 0.01 * std::sin(2.0 * t) / (1.0 + t)) < 1e-7);
    }
    CHECK_THROWS_AS(strip_discrete(tr, spec, LatticeField::delta({1, 0}, 1.0, 1)), ContractViolation);
}

TEST_CASE("growth rate and undamped frequency from synthetic signals") {
    const Trajectory g = synthetic(0.0, 30.0, 0.05, [](double t) { return 0.3 * std::exp(1.2 * t) + std::sin(2.0 * t) / t; });
    const ExponentialMode m = fit_growth_rate(g, {0, 0}, 20.0, 30.0);
    CHECK(m.rate == doctest::Approx(1.2).epsilon(1e-9));
    CHECK(m.amplitude == doctest::Approx(0.3).epsilon(1e-8));
    const Trajectory u = synthetic(0.0, 200.0, 0.05, [](double t) { return 0.2 * std::sin(3.1 * t + 0.3) + 0.01 * std::sin(2.0 * t) / t; });
    const UndampedMode um = fit_undamped_mode(u, {0, 0}, kSqrt8 + 0.05, kPi / 0.05, 100.0, 200.0);
    CHECK(std::abs(um.frequency - 3.1) < 1e-6);
    CHECK(um.amplitude == doctest::Approx(0.2).epsilon(1e-4));
}

TEST_CASE("consistency map: gamma and predicted exponents") {
    AsymptoticFit fit;
    for (std::size_t s = 0; s < 3; ++s) {
        fit.channels[s].nominal = kChannelFrequencies[s];
        fit.channels[s].frequency = kChannelFrequencies[s];
        fit.channels[s].power = 1.02;
        fit.channels[s].log_power = 0.1;
    }
    const DiscreteSpectrum none;
    SUBCASE("alpha >= 0 gives gamma = 1") {
        const ConsistencyReport r = consistency_report(fit, classification(0, 1), none);
        for (const auto& c : r.channels) {
            CHECK(c.map_defined);
            CHECK(c.predicted_power == 1.0);
            CHECK(c.predicted_log_power == 0.0);
        }
        CHECK(r.consistent);
    }
    SUBCASE("alpha = -1 gives gamma = 0") {
        const ConsistencyReport r = consistency_report(fit, classification(-1, 1), none);
        CHECK(r.channels[0].predicted_power == 0.0);
        CHECK(r.channels[0].predicted_log_power == 1.0);
        CHECK_FALSE(r.consistent);
    }
    SUBCASE("a missing discrete-mode fit is inconsistent") {
        DiscreteSpectrum one;
        Eigenvalue e;
        e.lambda = 9.0;
        e.rate = 3.0;
        one.aboves.push_back(e);
        CHECK_FALSE(consistency_report(fit, classification(0, 1), one).consistent);
        fit.undamped.push_back({3.00001, 0.1, 0.0});
        CHECK(consistency_report(fit, classification(0, 1), one).consistent);
    }
}

}
