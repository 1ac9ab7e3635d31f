#pragma once

// Free lattice Green's function G(k, xi) = (1/2pi) int_T e^{i sigma xi} / (phi(sigma) - k^2) d sigma,
// its limiting values on the band, and its logarithmic expansions at the branch points.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lwave/lattice.hpp"

namespace lwave {

inline constexpr double kSqrt8 = 2.8284271247461900976033774484194;

/// Spectral parameter k with Im k > 0, or a real k carrying the limit taken from Im k > 0.
class SpectralParameter {
public:
    enum class Approach { Interior, BoundaryFromAbove };

    /// Throws ContractViolation unless Im k > 0.
    static SpectralParameter interior(cplx k);
    /// Throws ContractViolation if k lies within 1e-9 of a branch point {0, +-2, +-sqrt 8}.
    /// Real k outside [-sqrt 8, sqrt 8] is allowed; there G is real analytic.
    static SpectralParameter boundary(double k);
    /// Physical-sheet parameter for lambda = k^2: Im k > 0 off the real axis, k = sqrt(lambda) > 0 for real
    /// lambda > 0 (boundary value from above), k = i sqrt(-lambda) for lambda < 0.
    static SpectralParameter from_lambda(cplx lambda);

    cplx k() const { return k_; }
    cplx lambda() const { return k_ * k_; }
    Approach approach() const { return approach_; }
    bool on_boundary() const { return approach_ == Approach::BoundaryFromAbove; }

private:
    SpectralParameter(cplx k, Approach a) : k_(k), approach_(a) {}
    cplx k_;
    Approach approach_;
};

/// Branch point k_s: k_0 = 0, k_{+-1} = +-2, k_{+-2} = +-sqrt 8.
struct BranchPoint {
    int s = 0;
    explicit BranchPoint(int index);
    double location() const;
    /// lambda = k_s^2, one of 0, 4, 8.
    double lambda() const { return location() * location(); }
};

/// Distance from k to the nearest branch point.
double distance_to_branch_points(cplx k);

struct GreenOptions {
    double tol = 1e-12;
    int max_panels = 20000;
};

/// G(k, xi) via closed-form integration in sigma_2 and adaptive quadrature in sigma_1.
cplx green_eval(const SpectralParameter& k, Site xi, const GreenOptions& opt = {});

/// Several offsets at once; all integrands share the quadrature panels.
std::vector<cplx> green_eval_many(const SpectralParameter& k, const std::vector<Site>& xis,
                                  const GreenOptions& opt = {});

/// Boundary value by Richardson extrapolation of G(k + i eta) over eta = 1e-2 * 2^-j, j < rungs.
/// Kept as an independent cross-check of the exact limiting integrand.
cplx green_eval_richardson(double k, Site xi, int rungs = 10, const GreenOptions& opt = {});

/// G(0, xi) - G(0, 0); finite although G itself diverges at k = 0.
double green_difference_at_zero(Site xi, const GreenOptions& opt = {});

/// max over max(|xi_1|, |xi_2|) <= radius of |(-Delta - k^2) G(k, xi) - 2 pi delta_0(xi)|.
double green_defect_residual(const SpectralParameter& k, int radius, const GreenOptions& opt = {});

/// Values G(k, d) for all offsets d = xi - eta with xi, eta in the square of half-width m.
class GreensTable {
public:
    GreensTable() = default;
    GreensTable(SpectralParameter k, int m, double tol, std::vector<cplx> quadrant);

    static GreensTable build(const SpectralParameter& k, int m, const GreenOptions& opt = {});

    const SpectralParameter& k() const { return *k_; }
    int m() const { return m_; }
    double tol() const { return tol_; }
    /// G(k, d) for |d_i| <= 2m. Uses G(k, d) = G(k, (|d_1|, |d_2|)).
    cplx operator()(Site d) const;

    nlohmann::json to_json() const;
    static GreensTable from_json(const nlohmann::json& j);

private:
    std::optional<SpectralParameter> k_;
    int m_ = 0;
    double tol_ = 0.0;
    std::vector<cplx> quadrant_;  // (2m+1)^2 values indexed by |d_2| * (2m+1) + |d_1|
};

/// On-disk memo of GreensTable keyed by (k rounded to 12 significant digits, m, tol).
/// Files are written to a temporary name and renamed into place.
class GreensTableCache {
public:
    explicit GreensTableCache(std::filesystem::path dir);
    GreensTable get(const SpectralParameter& k, int m, const GreenOptions& opt = {});
    std::filesystem::path path_for(const SpectralParameter& k, int m, double tol) const;

private:
    std::filesystem::path dir_;
};

/// G(k_s + kappa, xi) = u1 log kappa + u2 + o(1).
struct LogExpansion {
    BranchPoint branch{0};
    Site xi;
    cplx u1;
    cplx u2;
    double residual = 0.0;
};

struct LadderOptions {
    double kappa0 = 1e-2;
    int rungs = 13;
    /// Number of nuisance orders j in {kappa^j log kappa, kappa^j}, j = 1..nuisance_order.
    int nuisance_order = 3;
    double residual_threshold = 1e-9;
    GreenOptions green{};
};

/// kappa_m = kappa0 2^-m e^{i pi/4} for s >= 0 and the mirror -conj(kappa_m) for s < 0,
/// so that both rays stay in the upper half plane and values at +-s are conjugate.
std::vector<cplx> log_ladder(int s, const LadderOptions& opt = {});

/// Least-squares fit of the ladder values against the model above. Throws FitFailure.
LogExpansion log_expansion(BranchPoint s, Site xi, const LadderOptions& opt = {});

/// Fit of y(kappa) = c log kappa + d + nuisance terms; returns coefficients in basis order
/// [log kappa, 1, kappa log kappa, kappa, kappa^2 log kappa, ...] and the max residual.
std::vector<cplx> fit_log_ladder(const std::vector<cplx>& kappa, const std::vector<cplx>& y, int nuisance_order,
                                 double* max_residual = nullptr);

struct U2GrowthReport {
    std::vector<int> radii;
    std::vector<cplx> u2;
    std::vector<double> residuals;  // after removing slope * ln n + intercept + c3 / n^2
    double slope = 0.0;
    cplx intercept;
    double curvature = 0.0;  // c3
    double max_residual = 0.0;
    cplx u2_origin;
};

/// Regresses u_{2,0}(0, (n, 0)) = c1 ln n + c2 + c3 / n^2 along the first axis.
/// u_{2,0}(0, xi) - u_{2,0}(0, 0) is real, so the fit runs on real parts; Im c2 = Im u_{2,0}(0, 0).
/// Throws ContractViolation for fewer than four radii or a non-increasing list.
U2GrowthReport u2_growth_check(const std::vector<int>& radii, const LadderOptions& opt = {});

} // namespace lwave
