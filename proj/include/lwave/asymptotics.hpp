#pragma once

// Large-time fits of trajectories: decay channels at the branch frequencies {0, 2, sqrt 8}, exponential and
// undamped discrete modes, and the check of fitted decay against the branch-point classification.

#include <array>
#include <iosfwd>
#include <vector>

#include "lwave/evolution.hpp"

namespace lwave {

inline constexpr std::array<double, 3> kChannelFrequencies{0.0, 2.0, kSqrt8};

/// One term a t^{-p} (log t)^{logpow} sin(omega t + phase); the zero channel has no oscillation and a signed a.
struct DecayChannel {
    double nominal = 0.0;
    double frequency = 0.0;
    double amplitude = 0.0;
    double power = 0.0;
    double log_power = 0.0;
    bool log_term = false;         // log log t regressor kept (significant at 2 sigma)
    double power_stderr = 0.0;     // from the envelope regression
    double log_power_stderr = 0.0;
    double effective_power = 0.0;  // slope of log|envelope| against log t without the log log t regressor
    double phase = 0.0;
};

struct ExponentialMode {
    double rate = 0.0;
    double amplitude = 0.0;  // v ~ amplitude e^{rate t}
};

struct UndampedMode {
    double frequency = 0.0;
    double amplitude = 0.0;  // v ~ amplitude sin(frequency t + phase)
    double phase = 0.0;
};

struct AsymptoticFit {
    Site probe{};
    double window_start = 0.0, window_end = 0.0;
    std::vector<ExponentialMode> exponential;
    std::vector<UndampedMode> undamped;
    double secular = 0.0;  // least-squares coefficient of t over the window
    std::array<DecayChannel, 3> channels{};
    double residual_norm = 0.0;   // rms of data minus model over the window
    double smallest_channel = 0.0;  // rms of the weakest channel term over the window

    double model(double t) const;
    double channel_term(std::size_t s, double t) const;
    nlohmann::json to_json() const;
};

struct DecayOptions {
    double window_start = -1.0;  // -1: half the last sample time
    double window_end = -1.0;    // -1: the last sample time
    double demodulation_width = 40.0;
    double frequency_range = 0.05;
};

/// Subtracts the discrete-spectrum terms sinh(sigma t)/sigma P f and sin(rho t)/rho P f (with the leapfrog
/// kernel when the trajectory came from time stepping), skipping modes deflated during evolution.
/// Probes must lie in S. Throws FitFailure when a term cannot be subtracted or subtraction grows the tail.
Trajectory strip_discrete(const Trajectory& tr, const DiscreteSpectrum& spectrum, const LatticeField& f);

/// Exact solution kernel of one eigenmode for the method that produced the trajectory.
double mode_kernel(double lambda, double t, double dt, int richardson_levels);

/// Complex demodulation: Hann-weighted local average of v(t) e^{-i omega t} over `width` time units,
/// at the sample times whose full window lies inside the data.
struct Envelope {
    std::vector<double> times;
    std::vector<cplx> values;
};
Envelope demodulate(const std::vector<double>& t, const std::vector<double>& v, double omega, double width);

/// Three-stage channel fit: demodulation, log-envelope regression, phase by circular mean, then a joint
/// least-squares refinement on the raw samples. Throws FitFailure when the window is too short or a
/// frequency leaves its +-frequency_range band.
AsymptoticFit fit_decay_channels(const Trajectory& stripped, Site probe, const DecayOptions& opt = {});

/// Slope of log|v| on [t0, t1]; leapfrog dispersion is inverted when the trajectory carries a plain step.
ExponentialMode fit_growth_rate(const Trajectory& tr, Site probe, double t0, double t1);

/// Strongest periodogram peak in [lo, hi] over [t0, t1], refined to a local maximum, then amplitude and phase
/// by least squares. Leapfrog dispersion is inverted as for growth rates.
UndampedMode fit_undamped_mode(const Trajectory& tr, Site probe, double lo, double hi, double t0, double t1);

struct ChannelCheck {
    int s = 0;
    int alpha = 0, beta = 0;
    bool map_defined = false;
    double predicted_power = 0.0, predicted_log_power = 0.0;
    double fitted_power = 0.0, fitted_log_power = 0.0;
    bool power_ok = false, log_power_ok = false;
};

struct RateCheck {
    double expected = 0.0, fitted = 0.0;
    bool ok = false;
};

struct ConsistencyReport {
    std::array<ChannelCheck, 3> channels{};
    std::vector<RateCheck> growth;
    std::vector<RateCheck> undamped;
    bool consistent = false;
    nlohmann::json to_json() const;
};

/// gamma = 0 for alpha = -1 and 1 for alpha >= 0; predicted (power, log power) = (alpha + 1, beta - gamma).
/// Channel s in {0, 1, 2} compares with branch points +-2s. Tolerances: power 0.1, log power 0.5, rates 1e-4.
ConsistencyReport consistency_report(const AsymptoticFit& fit, const BranchClassification& cls,
                                     const DiscreteSpectrum& spectrum);

/// Plot data: t, v, channel envelopes |e_s| (demodulated), model.
void write_fit_csv(std::ostream& out, const Trajectory& stripped, const AsymptoticFit& fit,
                   double demodulation_width = 40.0);

} // namespace lwave
