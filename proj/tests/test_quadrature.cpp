#include <cmath>

#include "doctest.h"
#include "lwave/errors.hpp"
#include "lwave/quadrature.hpp"

using namespace lwave;

TEST_SUITE("quadrature") {

TEST_CASE("Gauss-Legendre rule is exact to degree 2n-1") {
    std::vector<double> x, w;
    gauss_legendre(8, x, w);
    double sum = 0.0, m14 = 0.0, m15 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sum += w[i];
        m14 += w[i] * std::pow(x[i], 14);
        m15 += w[i] * std::pow(x[i], 15);
    }
    CHECK(sum == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(m14 == doctest::Approx(2.0 / 15.0).epsilon(1e-14));
    CHECK(std::abs(m15) < 1e-15);
}

TEST_CASE("vector integrand shares panels") {
    auto f = [](double x, double, cplx* out) {
        out[0] = std::pow(x, 5);
        out[1] = std::sin(x);
        out[2] = std::exp(cplx(0.0, x));
    };
    const auto r = integrate_adaptive(f, 3, {Panel::regular(0.0, 1.0), Panel::regular(1.0, M_PI)});
    CHECK(std::abs(r.values[0] - (1.0 / 6.0 + (std::pow(M_PI, 6) - 1.0) / 6.0)) < 1e-11);
    CHECK(std::abs(r.values[1] - 2.0) < 1e-12);
    CHECK(std::abs(r.values[2] - cplx(0.0, 2.0)) < 1e-12);
}

TEST_CASE("sqrt panels absorb an inverse square-root endpoint") {
    auto f = [](double x, double offset, cplx* out) {
        const double d = std::isnan(offset) ? x - 0.25 : offset;
        out[0] = 1.0 / std::sqrt(d);
    };
    const auto r = integrate_adaptive(f, 1, {Panel::sqrt_at(0.25, 0.75)});
    CHECK(std::abs(r.values[0] - 2.0 * std::sqrt(0.75)) < 1e-12);
}

TEST_CASE("panel budget exhaustion raises QuadratureFailure") {
    auto f = [](double x, double, cplx* out) { out[0] = 1.0 / cplx(x - 0.5, 1e-9); };
    QuadratureOptions o;
    o.max_panels = 4;
    CHECK_THROWS_AS(integrate_adaptive(f, 1, {Panel::regular(0.0, 1.0)}, o), QuadratureFailure);
}

}
