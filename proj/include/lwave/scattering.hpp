#pragma once

// T-matrix, truncated resolvent, discrete spectrum, spectral density and branch classification for
// H = -Delta + q with q supported in the square S of half-width m.

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <ostream>
#include <optional>
#include <vector>

#include "lwave/green.hpp"

namespace lwave {

using MatrixC = Eigen::MatrixXcd;

struct ScatteringOptions {
    GreenOptions green{};
    /// Weight of G in the kernel of R^0. The correct value is 1/(2 pi); other values exist only so the
    /// test suite can inject a normalization bug and watch the correspondence check fail.
    double kernel_scale = 1.0 / (2.0 * kPi);
    GreensTableCache* cache = nullptr;
};

/// Potential q together with the square S it is considered on.
struct ScatteringProblem {
    LatticeField q;
    int m = 0;

    ScatteringProblem(LatticeField potential, int half_width);
    explicit ScatteringProblem(LatticeField potential) : ScatteringProblem(potential, potential.support_half_width()) {}

    SupportSquare square() const { return SupportSquare(m); }
    std::size_t size() const { return square().size(); }
    double q_at(std::size_t idx) const { return q(square().site(idx)).real(); }
    /// Gershgorin enclosure [min(0, min q), 8 + max(0, max q)] of the spectrum of H.
    std::pair<double, double> spectral_bounds() const;
};

GreensTable green_table(const SpectralParameter& k, int m, const ScatteringOptions& opt);

/// Kernel chi R^0 chi on S: scale * G(k, xi - eta).
MatrixC free_kernel(const GreensTable& table, double scale);

struct TMatrix {
    SpectralParameter k;
    MatrixC entries;
    cplx determinant() const;
    double smallest_singular_value() const;
};

/// T = I + q(xi) scale G(k, xi - eta).
TMatrix build_tmatrix(const ScatteringProblem& p, const SpectralParameter& k, const ScatteringOptions& opt = {});
TMatrix build_tmatrix(const ScatteringProblem& p, const GreensTable& table, const ScatteringOptions& opt = {});

struct TruncatedResolvent {
    SpectralParameter k;
    MatrixC entries;
};

/// R^ = (chi R^0 chi) T^{-1}. Throws NearSingular if sigma_min(T) < 1e-10 max(1, ||T||).
TruncatedResolvent truncated_resolvent(const ScatteringProblem& p, const SpectralParameter& k,
                                       const ScatteringOptions& opt = {});
TruncatedResolvent truncated_resolvent(const ScatteringProblem& p, const GreensTable& table,
                                       const ScatteringOptions& opt = {});

/// u = R^0 (f - q R^ f) evaluated on the square of half-width radius; f must be supported in S.
LatticeField reconstruct_full_solution(const ScatteringProblem& p, const SpectralParameter& k, const LatticeField& f,
                                       int radius, const ScatteringOptions& opt = {});

/// max over the square of half-width radius of |(-Delta + q - k^2) u - f| for u from reconstruct_full_solution.
double correspondence_residual(const ScatteringProblem& p, const SpectralParameter& k, const LatticeField& f,
                               int radius, const ScatteringOptions& opt = {});

struct Eigenvalue {
    double lambda = 0.0;
    /// sigma with lambda = -sigma^2 below the band, rho with lambda = rho^2 above it.
    double rate = 0.0;
    int multiplicity = 1;
    /// Residue projection P^ compressed to S (real symmetric up to roundoff).
    MatrixC projection;
};

struct ExceptionalFlag {
    double lambda = 0.0;
    bool suspected = false;
    double growth_exponent = 0.0;  // slope of log ||R^|| against -log |k_s^2 - k^2|
};

struct DiscreteSpectrum {
    int m = 0;
    std::vector<Eigenvalue> negatives;  // sorted by lambda ascending
    std::vector<Eigenvalue> aboves;     // sorted by lambda ascending
    std::array<ExceptionalFlag, 3> exceptional{};
    nlohmann::json to_json() const;
};

struct SpectrumOptions {
    ScatteringOptions scattering{};
    double scan_step = 1e-2;
    double lambda_resolution = 1e-13;
    double contour_radius = 1e-4;
    int contour_nodes = 16;
    /// sigma scan starts here; eigenvalues in (-sigma_min^2, 0) are left to the exceptional-point test.
    double sigma_min = 1e-4;
    bool compute_projections = true;
    bool check_exceptional = true;
};

/// Number of eigenvalues of H below -sigma^2 (inertia of 2 pi G(i sigma)^{-1} + Q on supp q).
int count_below(const ScatteringProblem& p, double sigma, const ScatteringOptions& opt = {});
/// Number of eigenvalues of H above rho^2 for rho > sqrt 8.
int count_above(const ScatteringProblem& p, double rho, const ScatteringOptions& opt = {});

/// Eigenvalues outside [0, 8] by inertia scan plus bisection, with residue projections.
/// Throws ScanBoundary if eigenvalues remain at the end of the scan range.
DiscreteSpectrum find_discrete_spectrum(const ScatteringProblem& p, const SpectrumOptions& opt = {});

/// Residue projection -(1/2 pi i) oint R^ d lambda on a circle around lambda0.
MatrixC residue_projection(const ScatteringProblem& p, double lambda0, double radius, int nodes,
                           const ScatteringOptions& opt = {});

struct InteriorReport {
    double min_singular_value = 0.0;
    double argmin_lambda = 0.0;
    int nodes = 0;
    bool pass = false;
};

/// Minimum over a grid in (0,4) u (4,8) of sigma_min(T) at boundary values; PASS iff it exceeds 1e-6.
InteriorReport verify_no_interior_eigenvalues(const ScatteringProblem& p, int nodes = 400,
                                              const ScatteringOptions& opt = {});

/// Quadrature grid on [0, 8]: Gauss-Legendre panels graded geometrically toward 0, 4 and 8, with weights
/// that include a log-model correction for the end caps the grid does not reach.
struct LambdaGrid {
    std::vector<double> lambda;
    std::vector<double> weight;

    struct Spec {
        double smallest_gap = 1e-5;
        double grading_limit = 0.05;  // geometric panels stop at this distance
        double max_panel = 0.05;
        int order = 8;
    };
    static LambdaGrid graded(const Spec& spec);
    static LambdaGrid graded() { return graded(Spec{}); }
};

struct SpectralDensity {
    LambdaGrid grid;
    std::vector<MatrixC> nu;  // (1/pi) Im R^_{lambda + i0}, entrywise

    /// sum_i w_i g(lambda_i) nu(lambda_i)
    MatrixC integrate(const std::function<double(double)>& g) const;
    void write_csv(std::ostream& out) const;
};

/// Throws ContractViolation for grid nodes within 1e-6 of {0, 4, 8}.
SpectralDensity spectral_density(const ScatteringProblem& p, const LambdaGrid& grid, const ScatteringOptions& opt = {});

struct BranchFit {
    int s = 0;
    int alpha = 0;
    int beta = 0;
    bool ambiguous = false;
    double residual = 0.0;         // relative residual of the chosen model on differenced ladder data
    double runner_up_residual = 0.0;
    int runner_up_alpha = 0, runner_up_beta = 0;
    MatrixC leading;               // A_s
};

struct BranchClassification {
    std::vector<BranchFit> fits;  // s = -2..2 in that order
    const BranchFit& at(int s) const { return fits.at(static_cast<std::size_t>(s + 2)); }
    nlohmann::json to_json() const;
};

struct BranchOptions {
    ScatteringOptions scattering{};
    LadderOptions ladder{};
    double validity_fraction = 0.1;
    double ambiguity_margin = 0.05;
};

/// Integer exponents (alpha_s, beta_s) of the leading singular term A_s kappa^alpha log^beta kappa of R^.
/// Pole terms at flagged exceptional points are not subtracted (none are flagged in practice).
BranchClassification classify_branch_points(const ScatteringProblem& p, const DiscreteSpectrum* spectrum = nullptr,
                                            const BranchOptions& opt = {});

} // namespace lwave
