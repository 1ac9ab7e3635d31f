#include <cmath>

#include "doctest.h"
#include "lwave/errors.hpp"
#include "lwave/lattice.hpp"
#include "lwave/random.hpp"

using namespace lwave;

namespace {

LatticeField random_complex(std::uint64_t seed, int m) {
    Lcg64 rng(seed);
    LatticeField f(m);
    for (cplx& v : f.values()) v = {rng.symmetric(1.0), rng.symmetric(1.0)};
    return f;
}

cplx fourier(const LatticeField& u, double s1, double s2) {
    cplx acc{};
    for (Site x : u.window().sites()) acc += u(x) * std::exp(cplx(0.0, s1 * x.xi1 + s2 * x.xi2));
    return acc;
}

} // namespace

TEST_SUITE("lattice") {

TEST_CASE("support square enumerates row-major with xi1 fastest") {
    const SupportSquare sq(2);
    CHECK(sq.size() == 25);
    CHECK(sq.site(0) == Site{-2, -2});
    CHECK(sq.site(1) == Site{-1, -2});
    CHECK(sq.site(5) == Site{-2, -1});
    for (std::size_t i = 0; i < sq.size(); ++i) CHECK(sq.index(sq.site(i)) == i);
    CHECK_FALSE(sq.contains({3, 0}));
}

TEST_CASE("lookups outside the window are zero") {
    const LatticeField f = LatticeField::delta({1, -1}, 2.5, 2);
    CHECK(f({1, -1}) == cplx(2.5));
    CHECK(f({7, 7}) == cplx{});
    CHECK(f.support_half_width() == 1);
    CHECK(LatticeField(3).support_half_width() == 0);
}

TEST_CASE("resizing that drops a nonzero value is a contract violation") {
    const LatticeField f = LatticeField::delta({2, 0}, 1.0, 2);
    CHECK_THROWS_AS(f.resized(1), ContractViolation);
    CHECK(f.resized(4)({2, 0}) == cplx(1.0));
}

TEST_CASE("the symbol is the Fourier multiplier of -Delta") {
    const LatticeField u = random_complex(3, 2);
    const LatticeField lap = laplacian_apply(u);
    for (auto [s1, s2] : {std::pair{0.3, -1.1}, std::pair{2.0, 0.7}, std::pair{-2.9, 3.1}}) {
        const cplx lhs = fourier(-1.0 * lap, s1, s2);
        const cplx rhs = symbol_eval(s1, s2) * fourier(u, s1, s2);
        CHECK(std::abs(lhs - rhs) < 1e-12);
    }
    CHECK(symbol_eval(0.0, 0.0) == 0.0);
    CHECK(symbol_eval(kPi, kPi) == doctest::Approx(8.0));
}

TEST_CASE("property: <u, -Delta u> equals the Dirichlet form") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const LatticeField u = random_complex(seed, 1 + static_cast<int>(seed % 3));
        const cplx q = inner(u, -1.0 * laplacian_apply(u));
        CHECK(std::abs(q.imag()) < 1e-12);
        CHECK(q.real() == doctest::Approx(dirichlet_form(u)).epsilon(1e-12));
    }
}

TEST_CASE("window Laplacian agrees with the finitely supported one") {
    const LatticeField u = random_complex(5, 2);
    const LatticeField a = laplacian_apply(u);
    const LatticeField b = laplacian_apply_window(u.resized(5), 4);
    for (Site s : SupportSquare(4).sites()) CHECK(std::abs(a(s) - b(s)) < 1e-15);
}

TEST_CASE("hamiltonian adds the potential pointwise") {
    const LatticeField u = random_complex(8, 1);
    const LatticeField q = LatticeField::delta({0, 0}, -3.0, 0);
    const LatticeField h = hamiltonian_apply(q, u);
    const LatticeField lap = laplacian_apply(u);
    CHECK(std::abs(h({0, 0}) - (-lap({0, 0}) - 3.0 * u({0, 0}))) < 1e-14);
    CHECK(std::abs(h({1, 1}) + lap({1, 1})) < 1e-14);
}

TEST_CASE("pairing is bilinear and inner is sesquilinear") {
    const LatticeField u = random_complex(11, 1), w = random_complex(12, 1);
    const cplx c{0.3, -1.2};
    CHECK(std::abs(pairing(c * u, w) - c * pairing(u, w)) < 1e-14);
    CHECK(std::abs(inner(c * u, w) - std::conj(c) * inner(u, w)) < 1e-14);
}

TEST_CASE("fields round-trip through JSON") {
    const LatticeField u = random_complex(21, 2);
    nlohmann::json j = u;
    const LatticeField v = nlohmann::json::parse(j.dump()).get<LatticeField>();
    CHECK(v.radius() == u.radius());
    CHECK(v.values() == u.values());
    CHECK_THROWS_AS((nlohmann::json{{"m", 1}, {"values", {{1, 0}}}}.get<LatticeField>()), ConfigError);
}

}
