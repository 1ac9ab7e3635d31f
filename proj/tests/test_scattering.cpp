#include <Eigen/Eigenvalues>
#include <cmath>

#include "doctest.h"
#include "lwave/errors.hpp"
#include "lwave/evolution.hpp"
#include "lwave/random.hpp"
#include "lwave/scattering.hpp"

using namespace lwave;

namespace {

LatticeField single(double v) { return LatticeField::delta({0, 0}, v, 0); }

// Root of 4 K(4/E) / E = 2 pi / V (E = 4 + sigma^2): the scalar equation 1 + (V / 2 pi) G(i sigma, 0) = 0
// for q = -V delta_0 with G(i sigma, 0) in closed form. Independent of the Green module.
double scalar_sigma(double v) {
    auto g = [&](double sigma) {
        const double e = 4.0 + sigma * sigma;
        return 4.0 * std::comp_ellint_1(4.0 / e) / e - 2.0 * kPi / v;
    };
    double lo = 1e-6, hi = 20.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) > 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Real field with values in [center - half, center + half).
LatticeField shifted_field(std::uint64_t seed, double center, double half, int m) {
    LatticeField f = random_field(seed, half, m);
    for (cplx& v : f.values()) v += center;
    return f;
}

double rayleigh_residual(const LatticeField& q, const LatticeField& v, double lambda) {
    const LatticeField hv = hamiltonian_apply(q, v);
    double r = 0.0;
    for (Site s : hv.window().sites()) r = std::max(r, std::abs(hv(s) - lambda * v(s)));
    return r;
}

} // namespace

TEST_SUITE("scattering") {

TEST_CASE("zero potential: T is the identity and R^ is the free kernel") {
    const ScatteringProblem p(LatticeField(0), 1);
    const auto k = SpectralParameter::interior({0.7, 0.3});
    CHECK((build_tmatrix(p, k).entries - MatrixC::Identity(9, 9)).norm() == 0.0);
    const auto table = green_table(k, 1, {});
    const MatrixC r0 = free_kernel(table, 1.0 / (2.0 * kPi));
    CHECK((truncated_resolvent(p, k).entries - r0).norm() < 1e-15);
}

TEST_CASE("property: reconstructed solutions solve the equation") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const ScatteringProblem p(random_field(seed, 4.0, 2), 2);
        const LatticeField f = random_field(seed + 50, 1.0, 2);
        for (const auto& k : {SpectralParameter::interior({0.4, 0.9}), SpectralParameter::interior({2.6, 0.05}),
                              SpectralParameter::boundary(0.9), SpectralParameter::boundary(2.1)})
            CHECK(correspondence_residual(p, k, f, 6) < 1e-9);
    }
}

TEST_CASE("mutation: a kernel without the 1/(2 pi) weight breaks the correspondence") {
    const ScatteringProblem p(random_field(4, 3.0, 2), 2);
    const LatticeField f = random_field(5, 1.0, 2);
    ScatteringOptions bad;
    bad.kernel_scale = 1.0;
    CHECK(correspondence_residual(p, SpectralParameter::interior({0.8, 0.3}), f, 7, bad) > 1e-3);
}

TEST_CASE("single-site eigenvalues match the closed-form scalar equation") {
    const double sigma = scalar_sigma(5.0);
    const auto below = find_discrete_spectrum(ScatteringProblem(single(-5.0), 0));
    REQUIRE(below.negatives.size() == 1);
    CHECK(below.aboves.empty());
    CHECK(std::abs(below.negatives[0].lambda + sigma * sigma) < 1e-10);
    CHECK(std::abs(below.negatives[0].rate - sigma) < 1e-10);
    // Above the band the same equation holds with E = rho^2 - 4, so lambda = 8 + sigma^2.
    const auto above = find_discrete_spectrum(ScatteringProblem(single(5.0), 0));
    REQUIRE(above.aboves.size() == 1);
    CHECK(above.negatives.empty());
    CHECK(std::abs(above.aboves[0].lambda - (8.0 + sigma * sigma)) < 1e-10);
}

TEST_CASE("property: spectrum of q above the band mirrors that of -q below it") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const LatticeField q = random_field(seed, 8.0, 1);
        SpectrumOptions so;
        so.compute_projections = false;
        so.check_exceptional = false;
        const auto a = find_discrete_spectrum(ScatteringProblem(q, 1), so);
        const auto b = find_discrete_spectrum(ScatteringProblem(-1.0 * q, 1), so);
        REQUIRE(a.aboves.size() == b.negatives.size());
        for (std::size_t i = 0; i < a.aboves.size(); ++i)
            CHECK(std::abs(a.aboves[i].lambda - (8.0 - b.negatives[b.negatives.size() - 1 - i].lambda)) < 1e-9);
    }
}

TEST_CASE("bound states agree with a large Dirichlet box, and P^ is psi psi^T on S") {
    const LatticeField q = shifted_field(9, -5.0, 2.0, 1);
    const ScatteringProblem p(q, 1);
    const auto spec = find_discrete_spectrum(p);
    REQUIRE(!spec.negatives.empty());
    for (const Eigenvalue& e : spec.negatives) {
        if (e.multiplicity != 1) continue;
        const LatticeField v = window_eigenvectors(q, {e.lambda}, 40).front();
        const double norm = std::sqrt(inner(v, v).real());
        CHECK(rayleigh_residual(q, v, e.lambda) / norm < 1e-8);
        const auto sq = p.square();
        for (std::size_t i = 0; i < sq.size(); ++i)
            for (std::size_t j = 0; j < sq.size(); ++j) {
                const cplx want = v(sq.site(i)) * v(sq.site(j)) / (norm * norm);
                CHECK(std::abs(e.projection(i, j) - want) < 1e-8);
            }
    }
}

TEST_CASE("inertia counts and the resolvent singularity at an eigenvalue") {
    const ScatteringProblem p(single(-5.0), 0);
    CHECK(count_below(p, 1.0) == 1);
    CHECK(count_below(p, 1.5) == 0);
    CHECK(count_above(ScatteringProblem(single(5.0), 0), 3.0) == 1);
    const double lambda = find_discrete_spectrum(p).negatives[0].lambda;
    CHECK_THROWS_AS(truncated_resolvent(p, SpectralParameter::from_lambda(lambda)), NearSingular);
}

TEST_CASE("property: sum rules and positivity of the spectral density") {
    for (std::uint64_t seed : {2u, 6u}) {
        const ScatteringProblem p(random_field(seed, 6.0, 1), 1);
        const auto spec = find_discrete_spectrum(p);
        const auto dens = spectral_density(p, LambdaGrid::graded());
        MatrixC s0 = dens.integrate([](double) { return 1.0; });
        MatrixC s1 = dens.integrate([](double l) { return l; });
        for (const auto* list : {&spec.negatives, &spec.aboves})
            for (const auto& e : *list) {
                s0 += e.projection;
                s1 += e.lambda * e.projection;
            }
        CHECK((s0 - MatrixC::Identity(9, 9)).cwiseAbs().maxCoeff() < 1e-4);
        for (std::size_t i = 0; i < 9; ++i) CHECK(std::abs(s1(i, i) - (4.0 + p.q_at(i))) < 1e-3);
        double worst = 0.0;
        for (std::size_t n = 0; n < dens.nu.size(); n += 37) {
            const MatrixC h = 0.5 * (dens.nu[n] + dens.nu[n].adjoint());
            worst = std::min(worst, Eigen::SelfAdjointEigenSolver<MatrixC>(h).eigenvalues().minCoeff());
        }
        CHECK(worst > -1e-10);
    }
}

TEST_CASE("grid nodes on a branch point are rejected") {
    LambdaGrid g;
    g.lambda = {4.0};
    g.weight = {1.0};
    CHECK_THROWS_AS(spectral_density(ScatteringProblem(single(1.0), 0), g), ContractViolation);
}

TEST_CASE("no interior eigenvalues for random potentials") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const InteriorReport r = verify_no_interior_eigenvalues(ScatteringProblem(random_field(seed, 10.0, 2), 2), 120);
        CHECK(r.pass);
        CHECK(r.min_singular_value > 1e-6);
    }
}

TEST_CASE("property: boundary values at -k are conjugate to those at +k") {
    const ScatteringProblem p(random_field(13, 5.0, 1), 1);
    for (double k : {0.5, 1.7, 2.4, 3.3}) {
        const MatrixC a = truncated_resolvent(p, SpectralParameter::boundary(k)).entries;
        const MatrixC b = truncated_resolvent(p, SpectralParameter::boundary(-k)).entries;
        CHECK((b - a.conjugate()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("branch classification") {
    SUBCASE("free resolvent has a log singularity at every branch point") {
        const auto cls = classify_branch_points(ScatteringProblem(LatticeField(0), 0));
        for (const BranchFit& f : cls.fits) {
            CHECK(f.alpha == 0);
            CHECK(f.beta == 1);
            CHECK_FALSE(f.ambiguous);
        }
    }
    SUBCASE("single site: bounded with an inverse log and A_0 close to 2 pi / V^2") {
        for (double v : {3.0, 5.0}) {
            const ScatteringProblem p(single(v), 0);
            const auto cls = classify_branch_points(p);
            for (int s = -2; s <= 2; ++s) {
                CHECK(cls.at(s).alpha == 0);
                CHECK(cls.at(s).beta == -1);
                CHECK(cls.at(s).alpha == cls.at(-s).alpha);
                CHECK(cls.at(s).beta == cls.at(-s).beta);
            }
            CHECK(std::abs(cls.at(0).leading(0, 0)) == doctest::Approx(2.0 * kPi / (v * v)).epsilon(0.03));
        }
    }
}

}
