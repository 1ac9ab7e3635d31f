#include "lwave/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <unsupported/Eigen/LevenbergMarquardt>

#include "lwave/errors.hpp"

namespace lwave {

namespace {

double wrap_phase(double p) {
    p = std::remainder(p, 2.0 * kPi);
    return p <= -kPi ? p + 2.0 * kPi : p;
}

struct Series {
    std::vector<double> t, v;
};

Series real_series(const Trajectory& tr, Site probe) {
    const std::size_t pi = tr.probe_index(probe);
    Series s;
    s.t = tr.times;
    s.v.resize(tr.times.size());
    for (std::size_t i = 0; i < tr.times.size(); ++i) s.v[i] = tr(i, pi).real();
    return s;
}

double uniform_step(const std::vector<double>& t) {
    if (t.size() < 3) throw FitFailure("asymptotics: fewer than three samples", 0.0);
    const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    for (std::size_t i = 1; i < t.size(); ++i)
        if (std::abs(t[i] - t[i - 1] - dt) > 1e-6 * dt)
            throw ContractViolation("asymptotics: samples must be uniformly spaced in time");
    return dt;
}

// Ordinary least squares; returns coefficients and their standard errors.
struct Regression {
    Eigen::VectorXd coef, stderr_;
    double rss = 0.0;
};

Regression ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    Regression r;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    r.coef = qr.solve(y);
    r.rss = (x * r.coef - y).squaredNorm();
    const auto dof = static_cast<double>(x.rows() - x.cols());
    const Eigen::MatrixXd cov = (x.transpose() * x).inverse() * (dof > 0 ? r.rss / dof : 0.0);
    r.stderr_ = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    return r;
}

// Joint model over the three channels, parameters packed per channel:
// zero channel (a, p[, q]); oscillatory channels (log a, p, omega, phase[, q]).
struct ChannelLayout {
    int offset = 0;
    bool log_term = false;
    bool oscillatory = false;
    int size() const { return (oscillatory ? 4 : 2) + (log_term ? 1 : 0); }
};

struct JointModel : Eigen::DenseFunctor<double> {
    const std::vector<double>& t;
    const std::vector<double>& v;
    std::array<ChannelLayout, 3> layout;
    double t_ref;

    JointModel(const std::vector<double>& times, const std::vector<double>& values,
               const std::array<ChannelLayout, 3>& lay, int n_params, double ref)
        : DenseFunctor<double>(n_params, static_cast<int>(times.size())), t(times), v(values), layout(lay),
          t_ref(ref) {}

    // Residuals are weighted by t / t_ref so that t^{-1} channels contribute evenly across the window.
    int operator()(const InputType& x, ValueType& fvec) const {
        for (std::size_t i = 0; i < t.size(); ++i) {
            double m = 0.0;
            for (std::size_t s = 0; s < 3; ++s) m += term(x, s, t[i]);
            fvec(static_cast<Eigen::Index>(i)) = (t[i] / t_ref) * (m - v[i]);
        }
        return 0;
    }

    int df(const InputType& x, JacobianType& jac) const {
        jac.setZero();
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double ti = t[i], w = ti / t_ref, lt = std::log(ti), llt = std::log(lt);
            const auto row = static_cast<Eigen::Index>(i);
            for (std::size_t s = 0; s < 3; ++s) {
                const ChannelLayout& c = layout[s];
                const int o = c.offset;
                if (!c.oscillatory) {
                    const double q = c.log_term ? x(o + 2) : 0.0;
                    const double base = std::pow(ti, -x(o + 1)) * std::pow(lt, q);
                    const double m = x(o) * base;
                    jac(row, o) = w * base;
                    jac(row, o + 1) = -w * lt * m;
                    if (c.log_term) jac(row, o + 2) = w * llt * m;
                } else {
                    const double q = c.log_term ? x(o + 4) : 0.0;
                    const double env = std::exp(x(o)) * std::pow(ti, -x(o + 1)) * std::pow(lt, q);
                    const double arg = x(o + 2) * ti + x(o + 3);
                    const double m = env * std::sin(arg);
                    jac(row, o) = w * m;
                    jac(row, o + 1) = -w * lt * m;
                    jac(row, o + 2) = w * env * ti * std::cos(arg);
                    jac(row, o + 3) = w * env * std::cos(arg);
                    if (c.log_term) jac(row, o + 4) = w * llt * m;
                }
            }
        }
        return 0;
    }

    double term(const InputType& x, std::size_t s, double ti) const {
        const ChannelLayout& c = layout[s];
        const int o = c.offset;
        const double lt = std::log(ti);
        if (!c.oscillatory) return x(o) * std::pow(ti, -x(o + 1)) * std::pow(lt, c.log_term ? x(o + 2) : 0.0);
        return std::exp(x(o)) * std::pow(ti, -x(o + 1)) * std::pow(lt, c.log_term ? x(o + 4) : 0.0) *
               std::sin(x(o + 2) * ti + x(o + 3));
    }
};

} // namespace

// ---------------------------------------------------------------------------------------------------------------

double mode_kernel(double lambda, double t, double dt, int richardson_levels) {
    if (dt <= 0.0 || richardson_levels <= 0) return propagator_symbol(t, lambda);
    // Leapfrog applied to one eigenmode: v_{n+1} - 2 v_n + v_{n-1} = -dt^2 lambda v_n, v_0 = 0, v_1 = dt.
    auto discrete = [&](double h) {
        const double n = std::round(t / h);
        const double c = 1.0 - 0.5 * h * h * lambda;
        if (lambda >= 0.0) {
            if (c <= -1.0) throw ContractViolation("mode_kernel: leapfrog unstable for this eigenvalue");
            const double th = std::acos(c);
            return th == 0.0 ? t : h * std::sin(n * th) / std::sin(th);
        }
        const double th = std::acosh(c);
        return h * std::sinh(n * th) / std::sinh(th);
    };
    const double a1 = discrete(dt);
    if (richardson_levels == 1) return a1;
    const double a2 = discrete(0.5 * dt);
    if (richardson_levels == 2) return (4.0 * a2 - a1) / 3.0;
    const double a3 = discrete(0.25 * dt);
    return (64.0 * a3 - 20.0 * a2 + a1) / 45.0;
}

Trajectory strip_discrete(const Trajectory& tr, const DiscreteSpectrum& spectrum, const LatticeField& f) {
    const SupportSquare sq(spectrum.m);
    if (f.support_half_width() > spectrum.m) throw ContractViolation("strip_discrete: f must be supported in S");
    for (Site s : tr.probes)
        if (!sq.contains(s)) throw ContractViolation("strip_discrete: probes must lie in S");
    const auto n = static_cast<Eigen::Index>(sq.size());
    Eigen::VectorXcd fs(n);
    for (Eigen::Index i = 0; i < n; ++i) fs(i) = f(sq.site(static_cast<std::size_t>(i)));

    Trajectory out = tr;
    out.method = tr.method + "+stripped";
    auto tail_norm = [](const Trajectory& x) {
        double s = 0.0;
        const std::size_t start = x.times.size() - std::max<std::size_t>(1, x.times.size() / 10);
        for (std::size_t i = start; i < x.times.size(); ++i)
            for (std::size_t pi = 0; pi < x.probes.size(); ++pi) s += std::norm(x(i, pi));
        return std::sqrt(s);
    };
    const double before = tail_norm(tr);
    const double horizon = tr.times.empty() ? 0.0 : tr.times.back();
    bool subtracted = false;
    for (const auto* list : {&spectrum.negatives, &spectrum.aboves})
        for (const Eigenvalue& e : *list) {
            const bool deflated = std::any_of(tr.deflated_lambdas.begin(), tr.deflated_lambdas.end(), [&](double l) {
                return std::abs(l - e.lambda) <= 1e-8 * (1.0 + std::abs(l));
            });
            if (deflated) continue;
            if (e.projection.rows() != n) throw ContractViolation("strip_discrete: spectrum lacks projections");
            if (e.lambda < 0.0 && std::exp(e.rate * horizon) > 1e8)
                throw FitFailure("strip_discrete: growing mode too large to subtract in floating point; deflate it "
                                 "during evolution",
                                 std::exp(e.rate * horizon));
            const Eigen::VectorXcd pf = e.projection * fs;
            for (std::size_t ti = 0; ti < tr.times.size(); ++ti) {
                const double g = mode_kernel(e.lambda, tr.times[ti], tr.dt, tr.richardson_levels);
                for (std::size_t pi = 0; pi < tr.probes.size(); ++pi)
                    out.values[ti * tr.probes.size() + pi] -= g * pf(static_cast<Eigen::Index>(sq.index(tr.probes[pi])));
            }
            subtracted = true;
        }
    const double after = tail_norm(out);
    if (subtracted && after >= before)
        throw FitFailure("strip_discrete: subtraction did not reduce the tail norm (projection mismatch)", after);
    return out;
}

Envelope demodulate(const std::vector<double>& t, const std::vector<double>& v, double omega, double width) {
    const double dt = uniform_step(t);
    const int half = static_cast<int>(std::lround(0.5 * width / dt));
    if (half < 1) throw ContractViolation("demodulate: window narrower than the sample spacing");
    std::vector<double> h(static_cast<std::size_t>(2 * half + 1));
    double hs = 0.0;
    for (int j = -half; j <= half; ++j) {
        const double c = std::cos(0.5 * kPi * j / half);
        h[static_cast<std::size_t>(j + half)] = c * c;
        hs += c * c;
    }
    for (double& x : h) x /= hs;
    std::vector<cplx> z(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) z[i] = v[i] * std::polar(1.0, -omega * t[i]);
    Envelope e;
    const auto nt = static_cast<int>(t.size());
    for (int i = half; i + half < nt; ++i) {
        cplx acc = 0.0;
        for (int j = -half; j <= half; ++j) acc += h[static_cast<std::size_t>(j + half)] * z[static_cast<std::size_t>(i + j)];
        e.times.push_back(t[static_cast<std::size_t>(i)]);
        e.values.push_back(acc);
    }
    return e;
}

double AsymptoticFit::channel_term(std::size_t s, double t) const {
    const DecayChannel& c = channels[s];
    const double env = c.amplitude * std::pow(t, -c.power) * std::pow(std::log(t), c.log_power);
    return s == 0 ? env : env * std::sin(c.frequency * t + c.phase);
}

double AsymptoticFit::model(double t) const {
    double m = 0.0;
    for (std::size_t s = 0; s < 3; ++s) m += channel_term(s, t);
    return m;
}

AsymptoticFit fit_decay_channels(const Trajectory& stripped, Site probe, const DecayOptions& opt) {
    const Series data = real_series(stripped, probe);
    const double dt = uniform_step(data.t);
    const double tb = opt.window_end > 0.0 ? opt.window_end : data.t.back();
    const double ta = opt.window_start > 0.0 ? opt.window_start : 0.5 * tb;
    const double width = opt.demodulation_width;
    // Twenty periods of the slowest oscillating channel, plus room for the demodulation window.
    if (tb - ta < 20.0 * kPi || tb - ta < 2.0 * width)
        throw FitFailure("fit_decay_channels: window too short", tb - ta);
    if (ta <= 1.0 || tb > data.t.back() + 1e-9) throw ContractViolation("fit_decay_channels: window outside the data");

    AsymptoticFit fit;
    fit.probe = probe;
    fit.window_start = ta;
    fit.window_end = tb;

    // Stages (i)-(iii): demodulate, refine frequency by phase slope, regress the log envelope, phase by circular mean.
    for (std::size_t s = 0; s < 3; ++s) {
        DecayChannel& c = fit.channels[s];
        c.nominal = kChannelFrequencies[s];
        c.frequency = c.nominal;
        Envelope env = demodulate(data.t, data.v, c.frequency, width);
        auto in_window = [&](double t) { return t >= ta && t <= tb; };
        if (s > 0) {
            std::vector<double> tt, ph;
            double prev = 0.0, unwrap = 0.0;
            bool first = true;
            for (std::size_t i = 0; i < env.times.size(); ++i) {
                if (!in_window(env.times[i])) continue;
                const double a = std::arg(env.values[i]);
                if (!first) {
                    double d = a - prev;
                    d = std::remainder(d, 2.0 * kPi);
                    unwrap += d;
                } else {
                    unwrap = a;
                    first = false;
                }
                prev = a;
                tt.push_back(env.times[i]);
                ph.push_back(unwrap);
            }
            Eigen::MatrixXd x(static_cast<Eigen::Index>(tt.size()), 2);
            Eigen::VectorXd y(static_cast<Eigen::Index>(tt.size()));
            for (std::size_t i = 0; i < tt.size(); ++i) {
                x(static_cast<Eigen::Index>(i), 0) = 1.0;
                x(static_cast<Eigen::Index>(i), 1) = tt[i];
                y(static_cast<Eigen::Index>(i)) = ph[i];
            }
            const double shift = ols(x, y).coef(1);
            if (std::abs(shift) > opt.frequency_range)
                throw FitFailure("fit_decay_channels: channel frequency outside the refinement band", shift);
            c.frequency += shift;
            env = demodulate(data.t, data.v, c.frequency, width);
        }
        // Decimate to roughly independent envelope samples (a quarter window apart).
        const auto stride = static_cast<std::size_t>(std::max(1L, std::lround(0.25 * width / dt)));
        std::vector<double> tt, ly;
        std::vector<cplx> ev;
        for (std::size_t i = 0; i < env.times.size(); i += stride)
            if (in_window(env.times[i])) {
                tt.push_back(env.times[i]);
                ly.push_back(std::log(std::abs(env.values[i])));
                ev.push_back(env.values[i]);
            }
        if (tt.size() < 6) throw FitFailure("fit_decay_channels: window too short for the envelope regression",
                                            static_cast<double>(tt.size()));
        int rises = 0;
        for (std::size_t i = 1; i < ly.size(); ++i)
            if (ly[i] > ly[i - 1] + 0.2) ++rises;
        if (rises > 0)
            throw FitFailure("fit_decay_channels: envelope of channel " + std::to_string(s) +
                                 " is not decaying; window too small",
                             static_cast<double>(rises));
        const auto nn = static_cast<Eigen::Index>(tt.size());
        Eigen::MatrixXd x3(nn, 3);
        Eigen::VectorXd y(nn);
        for (Eigen::Index i = 0; i < nn; ++i) {
            const double lt = std::log(tt[static_cast<std::size_t>(i)]);
            x3(i, 0) = 1.0;
            x3(i, 1) = lt;
            x3(i, 2) = std::log(lt);
            y(i) = ly[static_cast<std::size_t>(i)];
        }
        const Regression r2 = ols(x3.leftCols(2), y);
        const Regression r3 = ols(x3, y);
        c.effective_power = -r2.coef(1);
        c.log_term = std::abs(r3.coef(2)) > 2.0 * r3.stderr_(2);
        const Regression& r = c.log_term ? r3 : r2;
        c.power = -r.coef(1);
        c.power_stderr = r.stderr_(1);
        c.log_power = c.log_term ? r3.coef(2) : 0.0;
        c.log_power_stderr = c.log_term ? r3.stderr_(2) : 0.0;
        cplx mean = 0.0;
        for (cplx e : ev) mean += e;
        if (s == 0) {
            c.amplitude = (mean.real() < 0.0 ? -1.0 : 1.0) * std::exp(r.coef(0));
            c.phase = 0.0;
        } else {
            // sin(w t + phase) demodulates to (a / 2i) e^{i phase}.
            c.amplitude = 2.0 * std::exp(r.coef(0));
            c.phase = wrap_phase(std::arg(mean) + 0.5 * kPi);
        }
    }

    // Stage (iv): joint least squares on the raw samples in the window.
    std::vector<double> wt, wv;
    for (std::size_t i = 0; i < data.t.size(); ++i)
        if (data.t[i] >= ta && data.t[i] <= tb) {
            wt.push_back(data.t[i]);
            wv.push_back(data.v[i]);
        }
    std::array<ChannelLayout, 3> layout{};
    int np = 0;
    for (std::size_t s = 0; s < 3; ++s) {
        layout[s].offset = np;
        layout[s].oscillatory = s > 0;
        layout[s].log_term = fit.channels[s].log_term;
        np += layout[s].size();
    }
    Eigen::VectorXd x0(np);
    for (std::size_t s = 0; s < 3; ++s) {
        const DecayChannel& c = fit.channels[s];
        const int o = layout[s].offset;
        if (s == 0) {
            x0(o) = c.amplitude;
            x0(o + 1) = c.power;
            if (c.log_term) x0(o + 2) = c.log_power;
        } else {
            x0(o) = std::log(c.amplitude);
            x0(o + 1) = c.power;
            x0(o + 2) = c.frequency;
            x0(o + 3) = c.phase;
            if (c.log_term) x0(o + 4) = c.log_power;
        }
    }
    JointModel model(wt, wv, layout, np, ta);
    Eigen::VectorXd fv0(static_cast<Eigen::Index>(wt.size()));
    model(x0, fv0);
    Eigen::VectorXd x = x0;
    Eigen::LevenbergMarquardt<JointModel> lm(model);
    lm.setXtol(1e-15);
    lm.setFtol(1e-15);
    lm.setGtol(0.0);
    lm.setMaxfev(4000);
    lm.minimize(x);
    Eigen::VectorXd fv1(static_cast<Eigen::Index>(wt.size()));
    model(x, fv1);
    if (!(fv1.allFinite() && fv1.norm() <= fv0.norm())) x = x0;
    for (std::size_t s = 0; s < 3; ++s) {
        DecayChannel& c = fit.channels[s];
        const int o = layout[s].offset;
        if (s == 0) {
            c.amplitude = x(o);
            c.power = x(o + 1);
            if (c.log_term) c.log_power = x(o + 2);
        } else {
            c.amplitude = std::exp(x(o));
            c.power = x(o + 1);
            c.frequency = x(o + 2);
            c.phase = wrap_phase(x(o + 3));
            if (c.log_term) c.log_power = x(o + 4);
            if (std::abs(c.frequency - c.nominal) > opt.frequency_range)
                throw FitFailure("fit_decay_channels: refined frequency left the +-" +
                                     detail::format_number(opt.frequency_range) + " band",
                                 c.frequency - c.nominal);
        }
    }

    double res = 0.0, sec_num = 0.0, sec_den = 0.0;
    std::array<double, 3> mag{};
    for (std::size_t i = 0; i < wt.size(); ++i) {
        const double r = wv[i] - fit.model(wt[i]);
        res += r * r;
        sec_num += wt[i] * r;
        sec_den += wt[i] * wt[i];
        for (std::size_t s = 0; s < 3; ++s) mag[s] += std::pow(fit.channel_term(s, wt[i]), 2);
    }
    const auto nw = static_cast<double>(wt.size());
    fit.residual_norm = std::sqrt(res / nw);
    fit.smallest_channel = std::sqrt(*std::min_element(mag.begin(), mag.end()) / nw);
    fit.secular = sec_num / sec_den;
    return fit;
}

ExponentialMode fit_growth_rate(const Trajectory& tr, Site probe, double t0, double t1) {
    const Series data = real_series(tr, probe);
    std::vector<double> tt, ly;
    double sign = 0.0;
    for (std::size_t i = 0; i < data.t.size(); ++i)
        if (data.t[i] >= t0 && data.t[i] <= t1) {
            if (data.v[i] == 0.0) throw FitFailure("fit_growth_rate: zero sample in the window", 0.0);
            tt.push_back(data.t[i]);
            ly.push_back(std::log(std::abs(data.v[i])));
            sign += data.v[i] > 0.0 ? 1.0 : -1.0;
        }
    if (tt.size() < 3) throw FitFailure("fit_growth_rate: fewer than three samples in the window", 0.0);
    const auto n = static_cast<Eigen::Index>(tt.size());
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i, 0) = 1.0;
        x(i, 1) = tt[static_cast<std::size_t>(i)];
        y(i) = ly[static_cast<std::size_t>(i)];
    }
    const Regression r = ols(x, y);
    ExponentialMode m;
    m.rate = r.coef(1);
    if (tr.dt > 0.0 && tr.richardson_levels == 1) m.rate = 2.0 * std::sinh(0.5 * m.rate * tr.dt) / tr.dt;
    m.amplitude = (sign < 0.0 ? -1.0 : 1.0) * std::exp(r.coef(0));
    return m;
}

UndampedMode fit_undamped_mode(const Trajectory& tr, Site probe, double lo, double hi, double t0, double t1) {
    const Series data = real_series(tr, probe);
    std::vector<double> tt, vv, w;
    for (std::size_t i = 0; i < data.t.size(); ++i)
        if (data.t[i] >= t0 && data.t[i] <= t1) {
            tt.push_back(data.t[i]);
            vv.push_back(data.v[i]);
        }
    if (tt.size() < 16) throw FitFailure("fit_undamped_mode: too few samples in the window", 0.0);
    const double len = tt.back() - tt.front();
    for (double t : tt) {
        const double c = std::sin(kPi * (t - tt.front()) / len);
        w.push_back(c * c);
    }
    auto power = [&](double om) {
        cplx acc = 0.0;
        for (std::size_t i = 0; i < tt.size(); ++i) acc += w[i] * vv[i] * std::polar(1.0, -om * tt[i]);
        return std::abs(acc);
    };
    const double step = 0.25 * kPi / len;
    double best = lo, best_p = -1.0;
    for (double om = lo; om <= hi; om += step) {
        const double p = power(om);
        if (p > best_p) {
            best_p = p;
            best = om;
        }
    }
    // Golden-section refinement of the peak.
    double a = std::max(lo, best - step), b = std::min(hi, best + step);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double pc = power(c), pd = power(d);
    while (b - a > 1e-12) {
        if (pc > pd) {
            b = d;
            d = c;
            pd = pc;
            c = b - g * (b - a);
            pc = power(c);
        } else {
            a = c;
            c = d;
            pc = pd;
            d = a + g * (b - a);
            pd = power(d);
        }
    }
    const double om = 0.5 * (a + b);
    const auto n = static_cast<Eigen::Index>(tt.size());
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x(i, 0) = std::sin(om * tt[static_cast<std::size_t>(i)]);
        x(i, 1) = std::cos(om * tt[static_cast<std::size_t>(i)]);
        y(i) = vv[static_cast<std::size_t>(i)];
    }
    const Regression r = ols(x, y);
    UndampedMode m;
    m.frequency = om;
    if (tr.dt > 0.0 && tr.richardson_levels == 1) m.frequency = 2.0 * std::sin(0.5 * om * tr.dt) / tr.dt;
    m.amplitude = std::hypot(r.coef(0), r.coef(1));
    m.phase = std::atan2(r.coef(1), r.coef(0));
    return m;
}

ConsistencyReport consistency_report(const AsymptoticFit& fit, const BranchClassification& cls,
                                     const DiscreteSpectrum& spectrum) {
    ConsistencyReport rep;
    bool ok = true;
    for (int s = 0; s < 3; ++s) {
        ChannelCheck& c = rep.channels[static_cast<std::size_t>(s)];
        const BranchFit& b = cls.at(s);
        const DecayChannel& ch = fit.channels[static_cast<std::size_t>(s)];
        c.s = s;
        c.alpha = b.alpha;
        c.beta = b.beta;
        c.fitted_power = ch.power;
        c.fitted_log_power = ch.log_power;
        c.map_defined = b.alpha >= -1;
        if (!c.map_defined) continue;
        const int gamma = b.alpha >= 0 ? 1 : 0;
        c.predicted_power = b.alpha + 1;
        c.predicted_log_power = b.beta - gamma;
        c.power_ok = std::abs(c.fitted_power - c.predicted_power) <= 0.1;
        c.log_power_ok = std::abs(c.fitted_log_power - c.predicted_log_power) <= 0.5;
        ok = ok && c.power_ok && c.log_power_ok;
    }
    auto match = [&](double expected, const std::vector<double>& fitted) {
        RateCheck rc;
        rc.expected = expected;
        rc.fitted = std::numeric_limits<double>::quiet_NaN();
        double best = std::numeric_limits<double>::infinity();
        for (double f : fitted)
            if (std::abs(f - expected) < best) {
                best = std::abs(f - expected);
                rc.fitted = f;
            }
        rc.ok = best <= 1e-4;
        return rc;
    };
    std::vector<double> rates, freqs;
    for (const ExponentialMode& m : fit.exponential) rates.push_back(m.rate);
    for (const UndampedMode& m : fit.undamped) freqs.push_back(m.frequency);
    for (const Eigenvalue& e : spectrum.negatives) {
        rep.growth.push_back(match(e.rate, rates));
        ok = ok && rep.growth.back().ok;
    }
    for (const Eigenvalue& e : spectrum.aboves) {
        rep.undamped.push_back(match(e.rate, freqs));
        ok = ok && rep.undamped.back().ok;
    }
    rep.consistent = ok;
    return rep;
}

nlohmann::json AsymptoticFit::to_json() const {
    nlohmann::json j;
    j["probe"] = {probe.xi1, probe.xi2};
    j["window"] = {window_start, window_end};
    j["exponential"] = nlohmann::json::array();
    for (const auto& m : exponential) j["exponential"].push_back({{"rate", m.rate}, {"amplitude", m.amplitude}});
    j["undamped"] = nlohmann::json::array();
    for (const auto& m : undamped)
        j["undamped"].push_back({{"frequency", m.frequency}, {"amplitude", m.amplitude}, {"phase", m.phase}});
    j["secular"] = secular;
    j["channels"] = nlohmann::json::array();
    for (const auto& c : channels)
        j["channels"].push_back({{"nominal_frequency", c.nominal},
                                 {"frequency", c.frequency},
                                 {"amplitude", c.amplitude},
                                 {"power", c.power},
                                 {"log_power", c.log_power},
                                 {"log_term", c.log_term},
                                 {"power_stderr", c.power_stderr},
                                 {"log_power_stderr", c.log_power_stderr},
                                 {"effective_power", c.effective_power},
                                 {"phase", c.phase}});
    j["residual_norm"] = residual_norm;
    j["smallest_channel"] = smallest_channel;
    return j;
}

nlohmann::json ConsistencyReport::to_json() const {
    nlohmann::json j;
    j["channels"] = nlohmann::json::array();
    for (const auto& c : channels)
        j["channels"].push_back({{"s", c.s},
                                 {"alpha", c.alpha},
                                 {"beta", c.beta},
                                 {"map_defined", c.map_defined},
                                 {"predicted_power", c.predicted_power},
                                 {"predicted_log_power", c.predicted_log_power},
                                 {"fitted_power", c.fitted_power},
                                 {"fitted_log_power", c.fitted_log_power},
                                 {"power_ok", c.power_ok},
                                 {"log_power_ok", c.log_power_ok}});
    auto rates = [](const std::vector<RateCheck>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& r : v) a.push_back({{"expected", r.expected}, {"fitted", r.fitted}, {"ok", r.ok}});
        return a;
    };
    j["growth"] = rates(growth);
    j["undamped"] = rates(undamped);
    j["consistent"] = consistent;
    return j;
}

void write_fit_csv(std::ostream& out, const Trajectory& stripped, const AsymptoticFit& fit, double demodulation_width) {
    const Series data = real_series(stripped, fit.probe);
    std::array<Envelope, 3> env;
    for (std::size_t s = 0; s < 3; ++s)
        env[s] = demodulate(data.t, data.v, fit.channels[s].frequency, demodulation_width);
    out << "t,v,env0,env2,env8,model\n";
    char buf[160];
    std::array<std::size_t, 3> k{};
    for (std::size_t i = 0; i < data.t.size(); ++i) {
        const double t = data.t[i];
        if (t < fit.window_start || t > fit.window_end) continue;
        std::array<double, 3> e{};
        for (std::size_t s = 0; s < 3; ++s) {
            while (k[s] < env[s].times.size() && env[s].times[k[s]] < t - 1e-9) ++k[s];
            const bool hit = k[s] < env[s].times.size() && std::abs(env[s].times[k[s]] - t) < 1e-9;
            // Oscillating channels demodulate to half the amplitude.
            e[s] = hit ? (s == 0 ? 1.0 : 2.0) * std::abs(env[s].values[k[s]]) : std::nan("");
        }
        std::snprintf(buf, sizeof buf, "%.10g,%.17g,%.17g,%.17g,%.17g,%.17g\n", t, data.v[i], e[0], e[1], e[2],
                      fit.model(t));
        out << buf;
    }
}

} // namespace lwave
