#pragma once

// Solutions of v_tt + (-Delta + q) v = 0, v(0) = 0, v_t(0) = f by three independent routes:
// leapfrog time stepping, Chebyshev expansion of sin(t sqrt H)/sqrt H, and spectral reconstruction.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lwave/scattering.hpp"

namespace lwave {

struct Trajectory {
    std::vector<double> times;
    std::vector<Site> probes;
    std::vector<cplx> values;  // row-major: values[ti * probes.size() + pi]
    std::string method;
    double error_estimate = 0.0;
    std::vector<double> energy;            // per sample time, when recorded
    std::vector<double> deflated_lambdas;  // eigenvalues whose modes were projected out during stepping
    /// Leapfrog step and Richardson depth behind the values; dt = 0 marks continuous-time methods.
    double dt = 0.0;
    int richardson_levels = 0;

    cplx operator()(std::size_t ti, std::size_t pi) const { return values[ti * probes.size() + pi]; }
    std::vector<cplx> series(std::size_t pi) const;
    std::size_t probe_index(Site s) const;

    /// CSV with header "t, xi1, xi2, re, im", one row per (time, probe).
    void write_csv(std::ostream& out) const;
    static Trajectory read_csv(std::istream& in);
};

struct EvolutionConfig {
    LatticeField q;
    LatticeField f;
    double horizon = 10.0;
    double dt_out = 0.05;
    double dt = 0.01;
    /// Explicit sample times; when empty, samples are taken at multiples of dt_out up to the horizon.
    std::vector<double> sample_times;
    /// Window half-width for stepping; -1 selects ceil(horizon) + m + 20.
    int window_radius = -1;
    /// 1 = plain leapfrog, 2 or 3 = Richardson extrapolation over dt, dt/2 (, dt/4).
    int richardson_levels = 1;
    /// Probe sites; when empty, the square S of half-width m.
    std::vector<Site> probes;
    int chebyshev_degree_cap = 20000;
    /// Lower end of the Chebyshev interval; defaults to the Gershgorin bound, which is far too loose when
    /// q has bound states below the band (g_t grows like e^{t sqrt(-lambda)} there).
    std::optional<double> spectral_lower_bound;
    bool record_energy = false;
    bool check_boundary = true;
    /// Eigenvalues below the band whose modes are removed after every step (repeat for multiplicity).
    std::vector<double> deflate_lambdas;

    /// Half-width of the smallest square holding the supports of q and f.
    int support_half_width() const;
    std::vector<double> resolved_times() const;
    std::vector<Site> resolved_probes() const;
    int resolved_window() const;
};

/// Leapfrog (Stormer-Verlet) on the window with zero exterior.
/// Throws BoundaryContamination when signal reaches the window edge early enough to return to the probes.
Trajectory evolve_direct(const EvolutionConfig& cfg);

/// Whole field at time t by Chebyshev expansion of g_t(lambda) = sin(t sqrt lambda)/sqrt lambda.
LatticeField evolve_chebyshev_field(const EvolutionConfig& cfg, double t);

/// Probe values at the configured times; one shared recurrence serves all times.
Trajectory evolve_chebyshev(const EvolutionConfig& cfg);

/// Chebyshev coefficients of g_t on [a, b] truncated at 1e-14 of max(|c_n|, sup |g_t|). Throws DegreeCapReached.
std::vector<double> chebyshev_coefficients(double t, double a, double b, int cap);

/// g_t(lambda) = sin(t sqrt lambda)/sqrt lambda, continued to lambda <= 0.
double propagator_symbol(double t, double lambda);

/// v on S from the discrete spectrum and the spectral density:
/// sum sinh(sigma t)/sigma P f + sum sin(rho t)/rho P f + int g_t(lambda) nu(lambda) f d lambda.
Trajectory evolve_spectral(const ScatteringProblem& p, const DiscreteSpectrum& spectrum, const SpectralDensity& density,
                           const LatticeField& f, const std::vector<Site>& probes, const std::vector<double>& times);

/// Eigenvectors of -Delta + q on a square of half-width radius with zero exterior, one per entry of
/// lambdas (repeated entries give orthonormal bases of the eigenspace).
std::vector<LatticeField> window_eigenvectors(const LatticeField& q, const std::vector<double>& lambdas, int radius);

/// Largest relative difference max |a - b| / running max |a| over probes, at each common time.
std::vector<double> relative_difference(const Trajectory& a, const Trajectory& b);

} // namespace lwave
