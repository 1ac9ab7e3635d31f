#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "lwave/errors.hpp"
#include "lwave/green.hpp"

using namespace lwave;

namespace {

// Periodic trapezoid rule on an n x n grid; exponentially accurate for Im k^2 != 0 or k^2 off [0, 8].
cplx trapezoid_oracle(cplx k, Site xi, int n) {
    cplx sum{};
    for (int b = 0; b < n; ++b)
        for (int a = 0; a < n; ++a) {
            const double s1 = 2.0 * kPi * a / n, s2 = 2.0 * kPi * b / n;
            sum += std::cos(s1 * xi.xi1) * std::cos(s2 * xi.xi2) / (4.0 - 2.0 * std::cos(s1) - 2.0 * std::cos(s2) - k * k);
        }
    return 2.0 * kPi * sum / (static_cast<double>(n) * n);
}

// G(k, 0) for real k^2 outside [0, 8] through the complete elliptic integral of the first kind:
// the lattice average of 1/(E - 2 cos s1 - 2 cos s2) is (2 / (pi E)) K(4 / E) for E > 4.
double elliptic_origin(double lambda) {
    if (lambda < 0.0) {
        const double e = 4.0 - lambda;
        return 4.0 * std::comp_ellint_1(4.0 / e) / e;
    }
    const double e = lambda - 4.0;
    return -4.0 * std::comp_ellint_1(4.0 / e) / e;
}

} // namespace

TEST_SUITE("green") {

TEST_CASE("frozen value G(i, 0)") {
    // 4 K(4/5) / 5, also reproduced by the trapezoid oracle.
    CHECK(std::abs(green_eval(SpectralParameter::interior({0.0, 1.0}), {0, 0}) - 1.5962422221317836) < 1e-12);
}

TEST_CASE("origin values match the elliptic closed form below and above the band") {
    for (double sigma : {0.05, 0.3, 1.0, 2.5}) {
        const cplx g = green_eval(SpectralParameter::interior({0.0, sigma}), {0, 0});
        CHECK(std::abs(g - elliptic_origin(-sigma * sigma)) < 1e-11);
    }
    for (double rho : {2.9, 3.3, 5.0}) {
        const cplx g = green_eval(SpectralParameter::boundary(rho), {0, 0});
        CHECK(std::abs(g - elliptic_origin(rho * rho)) < 1e-11);
    }
}

TEST_CASE("agreement with the 2D trapezoid oracle") {
    for (cplx k : {cplx(0.3, 0.4), cplx(1.7, 0.25), cplx(2.5, 0.3)})
        for (Site xi : {Site{0, 0}, Site{3, 1}, Site{2, 4}}) {
            const cplx g = green_eval(SpectralParameter::interior(k), xi);
            CHECK(std::abs(g - trapezoid_oracle(k, xi, 768)) < 1e-10);
        }
}

TEST_CASE("property: defect identity at interior and boundary parameters") {
    for (cplx k : {cplx(0.0, 2.0), cplx(1.1, 0.01), cplx(2.3, 0.5)})
        CHECK(green_defect_residual(SpectralParameter::interior(k), 6) < 1e-9);
    for (double k : {0.4, 1.5, 2.4, 3.5}) CHECK(green_defect_residual(SpectralParameter::boundary(k), 6) < 1e-9);
}

TEST_CASE("property: lattice symmetries and conjugation") {
    const auto k = SpectralParameter::interior({1.3, 0.2});
    const auto km = SpectralParameter::interior({-1.3, 0.2});
    const auto v = green_eval_many(k, {{2, 1}, {1, 2}, {-2, 1}, {2, -1}});
    CHECK(std::abs(v[0] - v[1]) < 1e-13);
    CHECK(std::abs(v[0] - v[2]) < 1e-13);
    CHECK(std::abs(v[0] - v[3]) < 1e-13);
    CHECK(std::abs(green_eval(km, {2, 1}) - std::conj(v[0])) < 1e-12);
}

TEST_CASE("exact boundary values agree with Richardson extrapolation in eta") {
    for (double k : {0.8, 1.9, 2.2, 3.0})
        for (Site xi : {Site{0, 0}, Site{1, 2}}) {
            const cplx exact = green_eval(SpectralParameter::boundary(k), xi);
            CHECK(std::abs(exact - green_eval_richardson(k, xi)) < 1e-9);
        }
}

TEST_CASE("imaginary part on the band is pi times the density of states") {
    // Im G(k, 0) = (1/2) int delta(phi - k^2) d sigma, which tends to pi/2 as k -> 0 since phi ~ |sigma|^2.
    const cplx g = green_eval(SpectralParameter::boundary(0.01), {0, 0});
    CHECK(g.imag() == doctest::Approx(kPi / 2.0).epsilon(1e-3));
}

TEST_CASE("potential kernel values at k = 0") {
    // G(0, xi) - G(0, 0) = -(pi/2) a(xi) with a(1,0) = 1, a(1,1) = 4/pi, a(2,0) = 4 - 8/pi.
    CHECK(green_difference_at_zero({1, 0}) == doctest::Approx(-kPi / 2.0).epsilon(1e-12));
    CHECK(green_difference_at_zero({1, 1}) == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(green_difference_at_zero({2, 0}) == doctest::Approx(4.0 - 2.0 * kPi).epsilon(1e-12));
}

TEST_CASE("branch points are rejected by green_eval") {
    CHECK_THROWS_AS(green_eval(SpectralParameter::interior({2.0, 1e-10}), {0, 0}), ContractViolation);
    CHECK_THROWS_AS(SpectralParameter::interior({1.0, 0.0}), ContractViolation);
    CHECK_THROWS_AS(SpectralParameter::boundary(kSqrt8), ContractViolation);
}

TEST_CASE("log expansion coefficients at the branch points") {
    const Site xi{2, 1};
    CHECK(std::abs(log_expansion(BranchPoint(0), xi).u1 - cplx(-1.0)) < 1e-7);
    CHECK(std::abs(log_expansion(BranchPoint(2), xi).u1 - cplx(-0.5)) < 1e-7);
    CHECK(std::abs(log_expansion(BranchPoint(1), xi).u1) < 1e-8);
    CHECK(std::abs(log_expansion(BranchPoint(1), {1, 1}).u1 - cplx(0.0, 1.0)) < 1e-7);
    CHECK(std::abs(log_expansion(BranchPoint(-1), {1, 1}).u1 - cplx(0.0, -1.0)) < 1e-7);
    CHECK(std::abs(log_expansion(BranchPoint(1), {0, 2}).u1 - cplx(0.0, -1.0)) < 1e-7);
}

TEST_CASE("u2 at k = 0 grows like -log n") {
    const U2GrowthReport r = u2_growth_check({2, 4, 6, 8, 12, 16});
    CHECK(r.slope == doctest::Approx(-1.0).epsilon(1e-3));
    CHECK(r.max_residual < 1e-3);
    CHECK_THROWS_AS(u2_growth_check({2, 4, 3, 8}), ContractViolation);
}

TEST_CASE("tables: symmetric lookup, JSON round trip and the disk cache") {
    const auto k = SpectralParameter::interior({0.9, 0.4});
    const GreensTable t = GreensTable::build(k, 2);
    CHECK(std::abs(t({-3, 4}) - green_eval(k, {3, 4})) < 1e-12);
    const GreensTable back = GreensTable::from_json(nlohmann::json::parse(t.to_json().dump()));
    CHECK(back({4, -4}) == t({4, 4}));

    const auto dir = std::filesystem::temp_directory_path() / "lwave_green_cache_test";
    std::filesystem::remove_all(dir);
    GreensTableCache cache(dir);
    const GreensTable first = cache.get(k, 2);
    CHECK(std::filesystem::exists(cache.path_for(k, 2, 1e-12)));
    const GreensTable second = cache.get(k, 2);
    CHECK(second({2, 3}) == first({2, 3}));
    std::filesystem::remove_all(dir);
}

}
