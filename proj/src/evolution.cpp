#include "lwave/evolution.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "lwave/errors.hpp"

namespace lwave {

// ---------------------------------------------------------------------------------------------------------------
// Trajectory

std::vector<cplx> Trajectory::series(std::size_t pi) const {
    std::vector<cplx> out(times.size());
    for (std::size_t ti = 0; ti < times.size(); ++ti) out[ti] = (*this)(ti, pi);
    return out;
}

std::size_t Trajectory::probe_index(Site s) const {
    auto it = std::find(probes.begin(), probes.end(), s);
    if (it == probes.end())
        throw ContractViolation("Trajectory: no probe at (" + std::to_string(s.xi1) + "," + std::to_string(s.xi2) + ")");
    return static_cast<std::size_t>(it - probes.begin());
}

void Trajectory::write_csv(std::ostream& out) const {
    out << "t, xi1, xi2, re, im\n";
    char buf[128];
    for (std::size_t ti = 0; ti < times.size(); ++ti)
        for (std::size_t pi = 0; pi < probes.size(); ++pi) {
            const cplx v = (*this)(ti, pi);
            std::snprintf(buf, sizeof buf, "%.17g, %d, %d, %.17g, %.17g\n", times[ti], probes[pi].xi1, probes[pi].xi2,
                          v.real(), v.imag());
            out << buf;
        }
}

Trajectory Trajectory::read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("t,", 0) != 0) throw ConfigError("trajectory CSV: missing header");
    Trajectory tr;
    std::map<Site, std::size_t> probe_ids;
    std::vector<std::vector<std::pair<std::size_t, cplx>>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        for (char& c : line)
            if (c == ',') c = ' ';
        std::istringstream ls(line);
        double t, re, im;
        int a, b;
        if (!(ls >> t >> a >> b >> re >> im)) throw ConfigError("trajectory CSV: malformed row '" + line + "'");
        const Site s{a, b};
        auto [it, inserted] = probe_ids.emplace(s, tr.probes.size());
        if (inserted) tr.probes.push_back(s);
        if (tr.times.empty() || tr.times.back() != t) {
            tr.times.push_back(t);
            rows.emplace_back();
        }
        rows.back().emplace_back(it->second, cplx(re, im));
    }
    tr.values.assign(tr.times.size() * tr.probes.size(), cplx{});
    for (std::size_t ti = 0; ti < rows.size(); ++ti) {
        if (rows[ti].size() != tr.probes.size()) throw ConfigError("trajectory CSV: ragged time slice");
        for (auto [pi, v] : rows[ti]) tr.values[ti * tr.probes.size() + pi] = v;
    }
    return tr;
}

// ---------------------------------------------------------------------------------------------------------------
// Configuration

int EvolutionConfig::support_half_width() const { return std::max(q.support_half_width(), f.support_half_width()); }

std::vector<double> EvolutionConfig::resolved_times() const {
    if (!sample_times.empty()) return sample_times;
    if (!(dt_out > 0.0)) throw ContractViolation("EvolutionConfig: dt_out must be positive");
    const auto n = static_cast<long>(std::floor(horizon / dt_out + 1e-9));
    std::vector<double> t(static_cast<std::size_t>(n) + 1);
    for (long i = 0; i <= n; ++i) t[static_cast<std::size_t>(i)] = static_cast<double>(i) * dt_out;
    return t;
}

std::vector<Site> EvolutionConfig::resolved_probes() const {
    if (!probes.empty()) return probes;
    return SupportSquare(support_half_width()).sites();
}

int EvolutionConfig::resolved_window() const {
    if (window_radius >= 0) return window_radius;
    return static_cast<int>(std::ceil(horizon)) + support_half_width() + 20;
}

namespace {

void validate(const EvolutionConfig& cfg) {
    if (!cfg.q.is_real()) throw ContractViolation("evolution: potential must be real-valued");
    if (!(cfg.horizon >= 0.0)) throw ContractViolation("evolution: horizon must be non-negative");
    if (cfg.sample_times.empty() && cfg.dt_out > kPi / (2.0 * kSqrt8))
        throw ContractViolation("evolution: dt_out exceeds pi/(2 sqrt 8), the Nyquist bound for the band");
    for (double t : cfg.resolved_times())
        if (t < 0.0 || t > cfg.horizon * (1.0 + 1e-12))
            throw ContractViolation("evolution: sample time outside [0, horizon]");
}

int probe_half_width(const std::vector<Site>& probes) {
    int m = 0;
    for (Site s : probes) m = std::max({m, std::abs(s.xi1), std::abs(s.xi2)});
    return m;
}

// Real field on a square of half-width R stored with a one-cell zero halo.
struct RealGrid {
    int R = 0;
    int side = 0;
    int stride = 0;
    std::vector<std::pair<std::size_t, double>> qsites;

    RealGrid(int radius, const LatticeField& q) : R(radius), side(2 * radius + 1), stride(2 * radius + 3) {
        const int mq = q.support_half_width();
        if (mq > R) throw ContractViolation("evolution: window smaller than the potential support");
        for (Site s : SupportSquare(mq).sites())
            if (q(s).real() != 0.0) qsites.emplace_back(index(s), q(s).real());
    }

    std::size_t cells() const { return static_cast<std::size_t>(stride) * stride; }
    std::size_t index(Site s) const {
        return static_cast<std::size_t>(s.xi2 + R + 1) * stride + static_cast<std::size_t>(s.xi1 + R + 1);
    }
    bool contains(Site s) const { return std::max(std::abs(s.xi1), std::abs(s.xi2)) <= R; }

    std::vector<double> load(const LatticeField& f, bool imag_part) const {
        std::vector<double> g(cells(), 0.0);
        const int mf = f.support_half_width();
        if (mf > R) throw ContractViolation("evolution: window smaller than the initial data support");
        for (Site s : SupportSquare(mf).sites()) g[index(s)] = imag_part ? f(s).imag() : f(s).real();
        return g;
    }

    // out = (-Delta + q) v on the interior; the halo of out is left untouched (zero).
    void apply_h(const double* v, double* out) const {
        const std::ptrdiff_t st = stride;
#pragma omp parallel for schedule(static) if (side > 128)
        for (int r = 1; r <= side; ++r) {
            const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(r) * st;
            for (std::ptrdiff_t i = base + 1; i <= base + side; ++i)
                out[i] = 4.0 * v[i] - v[i - 1] - v[i + 1] - v[i - st] - v[i + st];
        }
        for (auto [i, qv] : qsites) out[i] += qv * v[i];
    }

    // Largest |v| on sites within `band` of the window edge.
    double edge_max(const double* v, int band) const {
        double mx = 0.0;
        for (int r = 1; r <= side; ++r) {
            const bool edge_row = r <= band || r > side - band;
            const std::size_t base = static_cast<std::size_t>(r) * stride;
            if (edge_row) {
                for (int c = 1; c <= side; ++c) mx = std::max(mx, std::abs(v[base + c]));
            } else {
                for (int c = 1; c <= band; ++c) mx = std::max(mx, std::abs(v[base + c]));
                for (int c = side - band + 1; c <= side; ++c) mx = std::max(mx, std::abs(v[base + c]));
            }
        }
        return mx;
    }
};

struct SparseVec {
    std::vector<std::size_t> idx;
    std::vector<double> val;
    double dot(const double* v) const {
        double s = 0.0;
        for (std::size_t i = 0; i < idx.size(); ++i) s += val[i] * v[idx[i]];
        return s;
    }
    void axpy(double a, double* v) const {
        for (std::size_t i = 0; i < idx.size(); ++i) v[idx[i]] += a * val[i];
    }
};

struct RunResult {
    std::vector<double> samples;  // times x probes
    std::vector<double> energy;
    double contamination_time = std::numeric_limits<double>::infinity();
};

constexpr int kEdgeBand = 5;
constexpr double kEdgeThreshold = 1e-12;

RunResult leapfrog(const RealGrid& g, std::vector<double> p, double dt, const std::vector<long>& sample_steps,
                   const std::vector<std::size_t>& probe_idx, bool record_energy, const std::vector<SparseVec>& deflate,
                   long edge_every) {
    const std::size_t n = g.cells();
    std::vector<double> v(n, 0.0), hv(n, 0.0);
    RunResult res;
    res.samples.assign(sample_steps.size() * probe_idx.size(), 0.0);
    if (record_energy) res.energy.assign(sample_steps.size(), 0.0);
    for (const SparseVec& phi : deflate) phi.axpy(-phi.dot(p.data()), p.data());

    const long last = sample_steps.empty() ? 0 : sample_steps.back();
    std::size_t next = 0;
    for (long step = 0; step <= last; ++step) {
        const bool sample = next < sample_steps.size() && sample_steps[next] == step;
        if (sample)
            for (std::size_t k = 0; k < probe_idx.size(); ++k) res.samples[next * probe_idx.size() + k] = v[probe_idx[k]];
        if (step % edge_every == 0 && std::isinf(res.contamination_time) &&
            g.edge_max(v.data(), kEdgeBand) > kEdgeThreshold)
            res.contamination_time = static_cast<double>(step) * dt;
        if (step == last && !(sample && record_energy)) break;

        g.apply_h(v.data(), hv.data());
        double pp = 0.0, vhv = 0.0;
        if (sample && record_energy) {
            // Staggered energy (1/2)<p_{n-1/2}, p_{n+1/2}> + (1/2)<v_n, H v_n>, conserved exactly by leapfrog.
            for (std::size_t i = 0; i < n; ++i) {
                const double pn = p[i] - dt * hv[i];
                pp += p[i] * pn;
                vhv += v[i] * hv[i];
            }
            res.energy[next] = 0.5 * (pp + vhv);
            if (step == last) break;
        }
        double* pd = p.data();
        double* vd = v.data();
        const double* hd = hv.data();
#pragma omp parallel for schedule(static) if (n > 100000)
        for (std::size_t i = 0; i < n; ++i) {
            pd[i] -= dt * hd[i];
            vd[i] += dt * pd[i];
        }
        for (const SparseVec& phi : deflate) {
            phi.axpy(-phi.dot(pd), pd);
            phi.axpy(-phi.dot(vd), vd);
        }
        if (sample) ++next;
    }
    return res;
}

std::vector<long> steps_for(const std::vector<double>& times, double dt) {
    std::vector<long> steps;
    for (double t : times) {
        const long s = std::lround(t / dt);
        if (std::abs(static_cast<double>(s) * dt - t) > 1e-9 * std::max(1.0, t))
            throw ContractViolation("evolve_direct: sample time " + std::to_string(t) + " is not a multiple of dt");
        if (!steps.empty() && s <= steps.back())
            throw ContractViolation("evolve_direct: sample times must be strictly increasing");
        steps.push_back(s);
    }
    return steps;
}

} // namespace

// ---------------------------------------------------------------------------------------------------------------
// Window eigenvectors

std::vector<LatticeField> window_eigenvectors(const LatticeField& q, const std::vector<double>& lambdas, int radius) {
    std::vector<LatticeField> out;
    if (lambdas.empty()) return out;
    const SupportSquare sq(radius);
    const auto n = static_cast<Eigen::Index>(sq.size());

    std::vector<double> sorted = lambdas;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::pair<double, int>> groups;
    for (double l : sorted) {
        if (!groups.empty() && std::abs(l - groups.back().first) <= 1e-8 * (1.0 + std::abs(l)))
            ++groups.back().second;
        else
            groups.emplace_back(l, 1);
    }

    std::mt19937_64 rng(0x5eed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Eigen::MatrixXd basis(n, 0);
    for (auto [lambda, mult] : groups) {
        const double shift = lambda - 1e-7 * (1.0 + std::abs(lambda));
        std::vector<Eigen::Triplet<double>> trips;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Site s = sq.site(static_cast<std::size_t>(i));
            trips.emplace_back(i, i, 4.0 + q(s).real() - shift);
            for (Site d : {Site{1, 0}, Site{-1, 0}, Site{0, 1}, Site{0, -1}})
                if (sq.contains(s + d)) trips.emplace_back(i, static_cast<Eigen::Index>(sq.index(s + d)), -1.0);
        }
        Eigen::SparseMatrix<double> a(n, n);
        a.setFromTriplets(trips.begin(), trips.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(a);
        if (lu.info() != Eigen::Success) throw ContractViolation("window_eigenvectors: factorisation failed");

        Eigen::MatrixXd x(n, mult);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uni(rng);
        for (int it = 0; it < 8; ++it) {
            Eigen::MatrixXd y = lu.solve(x);
            x = Eigen::HouseholderQR<Eigen::MatrixXd>(y).householderQ() * Eigen::MatrixXd::Identity(n, mult);
        }
        // Orthogonalise against earlier groups (exact eigenvectors already are; this removes roundoff).
        if (basis.cols() > 0) x -= basis * (basis.transpose() * x);
        x = Eigen::HouseholderQR<Eigen::MatrixXd>(x).householderQ() * Eigen::MatrixXd::Identity(n, mult);
        Eigen::MatrixXd grown(n, basis.cols() + mult);
        grown << basis, x;
        basis = grown;
    }
    for (Eigen::Index c = 0; c < basis.cols(); ++c) {
        LatticeField phi(radius);
        for (Eigen::Index i = 0; i < n; ++i) phi.values()[static_cast<std::size_t>(i)] = basis(i, c);
        out.push_back(std::move(phi));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------------------------
// Direct time stepping

Trajectory evolve_direct(const EvolutionConfig& cfg) {
    validate(cfg);
    if (!(cfg.dt > 0.0) || cfg.dt > 0.05) throw ContractViolation("evolve_direct: dt must lie in (0, 0.05]");
    if (cfg.richardson_levels < 1 || cfg.richardson_levels > 3)
        throw ContractViolation("evolve_direct: richardson_levels must be 1, 2 or 3");

    const std::vector<double> times = cfg.resolved_times();
    const std::vector<Site> probes = cfg.resolved_probes();
    const int R = cfg.resolved_window();
    const RealGrid grid(R, cfg.q);
    std::vector<std::size_t> probe_idx;
    for (Site s : probes) {
        if (!grid.contains(s)) throw ContractViolation("evolve_direct: probe outside the window");
        probe_idx.push_back(grid.index(s));
    }
    const int mp = probe_half_width(probes);

    std::vector<SparseVec> deflate;
    if (!cfg.deflate_lambdas.empty()) {
        const int re = std::min(R, cfg.q.support_half_width() + 40);
        for (const LatticeField& phi : window_eigenvectors(cfg.q, cfg.deflate_lambdas, re)) {
            SparseVec sv;
            for (Site s : phi.window().sites()) {
                sv.idx.push_back(grid.index(s));
                sv.val.push_back(phi(s).real());
            }
            deflate.push_back(std::move(sv));
        }
    }

    const bool complex_f = !cfg.f.is_real();
    std::vector<std::vector<cplx>> levels;
    std::vector<double> energy;
    for (int level = 0; level < cfg.richardson_levels; ++level) {
        const double dt = cfg.dt / static_cast<double>(1 << level);
        const std::vector<long> steps = steps_for(times, dt);
        const long edge_every = std::max(1L, std::lround(0.5 / dt));
        std::vector<cplx> acc(times.size() * probes.size());
        for (int part = 0; part < (complex_f ? 2 : 1); ++part) {
            const RunResult r = leapfrog(grid, grid.load(cfg.f, part == 1), dt, steps, probe_idx,
                                         cfg.record_energy && level == 0, deflate, edge_every);
            // A signal at the edge at time tc needs at least R - band - mp more time units to come back to the
            // probes; 10 units of slack cover the exponentially small precursor ahead of the front.
            if (cfg.check_boundary && r.contamination_time + (R - kEdgeBand - mp) - 10.0 < cfg.horizon)
                throw BoundaryContamination("evolve_direct: signal reached the window edge at t = " +
                                            std::to_string(r.contamination_time) + " with window radius " +
                                            std::to_string(R) + "; enlarge the window");
            const cplx unit = part == 1 ? cplx(0.0, 1.0) : cplx(1.0, 0.0);
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += unit * r.samples[i];
            if (level == 0 && cfg.record_energy) {
                if (energy.empty()) energy.assign(r.energy.size(), 0.0);
                for (std::size_t i = 0; i < energy.size(); ++i) energy[i] += r.energy[i];
            }
        }
        levels.push_back(std::move(acc));
    }

    Trajectory tr;
    tr.times = times;
    tr.probes = probes;
    tr.energy = std::move(energy);
    tr.deflated_lambdas = cfg.deflate_lambdas;
    tr.method = "direct";
    tr.dt = cfg.dt;
    tr.richardson_levels = cfg.richardson_levels;
    tr.values.resize(levels[0].size());
    double err = 0.0;
    for (std::size_t i = 0; i < tr.values.size(); ++i) {
        cplx v;
        switch (cfg.richardson_levels) {
        case 1: v = levels[0][i]; break;
        case 2: v = (4.0 * levels[1][i] - levels[0][i]) / 3.0; break;
        default: v = (64.0 * levels[2][i] - 20.0 * levels[1][i] + levels[0][i]) / 45.0; break;
        }
        tr.values[i] = v;
        if (cfg.richardson_levels > 1) err = std::max(err, std::abs(v - levels.back()[i]));
    }
    tr.error_estimate = err;
    return tr;
}

// ---------------------------------------------------------------------------------------------------------------
// Chebyshev expansion

double propagator_symbol(double t, double lambda) {
    const double x = lambda * t * t;
    if (std::abs(x) < 1e-4) return t * (1.0 - x / 6.0 + x * x / 120.0 - x * x * x / 5040.0);
    if (lambda > 0.0) {
        const double s = std::sqrt(lambda);
        return std::sin(t * s) / s;
    }
    const double s = std::sqrt(-lambda);
    return std::sinh(t * s) / s;
}

std::vector<double> chebyshev_coefficients(double t, double a, double b, int cap) {
    if (!(b > a)) throw ContractViolation("chebyshev_coefficients: empty interval");
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int n = 64;; n *= 2) {
        std::vector<double> fv(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) fv[j] = propagator_symbol(t, mid + half * std::cos(kPi * (j + 0.5) / n));
        // cos(pi k (2j+1) / 2n) through an exact integer reduction of the angle; the table keeps the
        // DCT noise floor near machine precision for large n.
        std::vector<double> table(static_cast<std::size_t>(4 * n));
        for (int r = 0; r < 4 * n; ++r) table[r] = std::cos(kPi * r / (2.0 * n));
        std::vector<double> c(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) {
            double s = 0.0;
            const long step = 2L * k;
            long r = k;
            for (int j = 0; j < n; ++j, r += step) {
                r %= 4L * n;
                s += fv[j] * table[static_cast<std::size_t>(r)];
            }
            c[k] = 2.0 * s / n;
        }
        c[0] *= 0.5;
        // Relative to the sup norm of g as well, so roundoff in the sums cannot pass for signal.
        double mx = 0.0;
        for (double v : c) mx = std::max(mx, std::abs(v));
        for (double v : fv) mx = std::max(mx, std::abs(v));
        int degree = 0;
        for (int k = 0; k < n; ++k)
            if (std::abs(c[k]) > 1e-14 * mx) degree = k;
        if (degree > cap) throw DegreeCapReached("chebyshev_coefficients: t = " + std::to_string(t), std::abs(c[cap]));
        if (degree < n / 2) {
            c.resize(static_cast<std::size_t>(degree) + 1);
            return c;
        }
        if (n > 4 * cap) throw DegreeCapReached("chebyshev_coefficients: t = " + std::to_string(t), std::abs(c[n - 1]));
    }
}

namespace {

std::pair<double, double> chebyshev_interval(const EvolutionConfig& cfg) {
    double qmin = 0.0, qmax = 0.0;
    for (cplx v : cfg.q.values()) {
        qmin = std::min(qmin, v.real());
        qmax = std::max(qmax, v.real());
    }
    double lo = qmin;
    if (cfg.spectral_lower_bound) {
        lo = *cfg.spectral_lower_bound;
    } else if (qmin < 0.0) {
        SpectrumOptions so;
        so.compute_projections = false;
        so.check_exceptional = false;
        const DiscreteSpectrum spec = find_discrete_spectrum(ScatteringProblem(cfg.q), so);
        const double bottom = spec.negatives.empty() ? -so.sigma_min * so.sigma_min : spec.negatives.front().lambda;
        lo = std::min(bottom, -so.sigma_min * so.sigma_min) - 1e-6 * (1.0 + std::abs(bottom));
    }
    return {lo, 8.0 + qmax};
}

// T_n(Ht) f for n = 0..degree on a window, with callbacks per n. Ht = (2H - (a+b))/(b-a).
template <class Visit>
void chebyshev_recurrence(const RealGrid& g, std::vector<double> t0, double a, double b, int degree, Visit visit) {
    const std::size_t n = g.cells();
    const double s = 2.0 / (b - a), c = (a + b) / (b - a);
    std::vector<double> t1(n, 0.0), t2(n, 0.0), hv(n, 0.0);
    visit(0, t0);
    if (degree == 0) return;
    g.apply_h(t0.data(), hv.data());
    for (std::size_t i = 0; i < n; ++i) t1[i] = s * hv[i] - c * t0[i];
    visit(1, t1);
    for (int k = 2; k <= degree; ++k) {
        g.apply_h(t1.data(), hv.data());
        const double* h = hv.data();
        const double* p1 = t1.data();
        const double* p0 = t0.data();
        double* out = t2.data();
#pragma omp parallel for schedule(static) if (n > 100000)
        for (std::size_t i = 0; i < n; ++i) out[i] = 2.0 * (s * h[i] - c * p1[i]) - p0[i];
        std::swap(t0, t1);
        std::swap(t1, t2);
        visit(k, t1);
    }
}

} // namespace

LatticeField evolve_chebyshev_field(const EvolutionConfig& cfg, double t) {
    validate(cfg);
    const auto [a, b] = chebyshev_interval(cfg);
    const std::vector<double> c = chebyshev_coefficients(t, a, b, cfg.chebyshev_degree_cap);
    const int degree = static_cast<int>(c.size()) - 1;
    const int mf = cfg.f.support_half_width();
    const int R = std::max(mf + degree + 1, cfg.q.support_half_width());
    const RealGrid grid(R, cfg.q);
    LatticeField out(R);
    const bool complex_f = !cfg.f.is_real();
    for (int part = 0; part < (complex_f ? 2 : 1); ++part) {
        std::vector<double> acc(grid.cells(), 0.0);
        chebyshev_recurrence(grid, grid.load(cfg.f, part == 1), a, b, degree, [&](int k, const std::vector<double>& tk) {
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += c[k] * tk[i];
        });
        const cplx unit = part == 1 ? cplx(0.0, 1.0) : cplx(1.0, 0.0);
        for (Site s : out.window().sites()) out.at(s) += unit * acc[grid.index(s)];
    }
    return out;
}

Trajectory evolve_chebyshev(const EvolutionConfig& cfg) {
    validate(cfg);
    const std::vector<double> times = cfg.resolved_times();
    const std::vector<Site> probes = cfg.resolved_probes();
    const auto [a, b] = chebyshev_interval(cfg);
    std::vector<std::vector<double>> coeffs;
    int degree = 0;
    for (double t : times) {
        coeffs.push_back(chebyshev_coefficients(t, a, b, cfg.chebyshev_degree_cap));
        degree = std::max(degree, static_cast<int>(coeffs.back().size()) - 1);
    }
    // Zero exterior corrupts T_n f first at the window edge; the error moves inward one site per step, so it
    // cannot reach the probes before step 2R - mf - mp + 1 > degree.
    const int mf = cfg.f.support_half_width(), mp = probe_half_width(probes);
    const int R = std::max((degree + mf + mp) / 2 + 2, std::max(mp, cfg.q.support_half_width()));
    const RealGrid grid(R, cfg.q);
    std::vector<std::size_t> probe_idx;
    for (Site s : probes) probe_idx.push_back(grid.index(s));

    Trajectory tr;
    tr.times = times;
    tr.probes = probes;
    tr.method = "chebyshev";
    tr.values.assign(times.size() * probes.size(), cplx{});
    const bool complex_f = !cfg.f.is_real();
    for (int part = 0; part < (complex_f ? 2 : 1); ++part) {
        const cplx unit = part == 1 ? cplx(0.0, 1.0) : cplx(1.0, 0.0);
        chebyshev_recurrence(grid, grid.load(cfg.f, part == 1), a, b, degree, [&](int k, const std::vector<double>& tk) {
            for (std::size_t ti = 0; ti < times.size(); ++ti) {
                if (k >= static_cast<int>(coeffs[ti].size())) continue;
                const double ck = coeffs[ti][k];
                for (std::size_t pi = 0; pi < probes.size(); ++pi)
                    tr.values[ti * probes.size() + pi] += unit * (ck * tk[probe_idx[pi]]);
            }
        });
    }
    // Truncation bound: coefficients were cut at 1e-14 of the largest.
    double cmax = 0.0;
    for (const auto& c : coeffs)
        for (double v : c) cmax = std::max(cmax, std::abs(v));
    tr.error_estimate = 1e-14 * cmax * cfg.f.max_abs() * static_cast<double>(degree + 1);
    return tr;
}

// ---------------------------------------------------------------------------------------------------------------
// Spectral reconstruction

Trajectory evolve_spectral(const ScatteringProblem& p, const DiscreteSpectrum& spectrum, const SpectralDensity& density,
                           const LatticeField& f, const std::vector<Site>& probes, const std::vector<double>& times) {
    const SupportSquare sq = p.square();
    if (f.support_half_width() > p.m) throw ContractViolation("evolve_spectral: initial data must be supported in S");
    for (Site s : probes)
        if (!sq.contains(s)) throw ContractViolation("evolve_spectral: probes must lie in S");
    const auto n = static_cast<Eigen::Index>(sq.size());
    Eigen::VectorXcd fs(n);
    for (Eigen::Index i = 0; i < n; ++i) fs(i) = f(sq.site(static_cast<std::size_t>(i)));

    struct Mode {
        bool below;
        double rate;
        Eigen::VectorXcd pf;
    };
    std::vector<Mode> modes;
    for (const Eigenvalue& e : spectrum.negatives) {
        if (e.projection.rows() != n) throw ContractViolation("evolve_spectral: spectrum lacks projections");
        modes.push_back({true, e.rate, e.projection * fs});
    }
    for (const Eigenvalue& e : spectrum.aboves) {
        if (e.projection.rows() != n) throw ContractViolation("evolve_spectral: spectrum lacks projections");
        modes.push_back({false, e.rate, e.projection * fs});
    }
    std::vector<Eigen::VectorXcd> nuf(density.nu.size());
    for (std::size_t i = 0; i < nuf.size(); ++i) nuf[i] = density.grid.weight[i] * (density.nu[i] * fs);

    Trajectory tr;
    tr.times = times;
    tr.probes = probes;
    tr.method = "spectral";
    tr.values.resize(times.size() * probes.size());
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        const double t = times[ti];
        Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n);
        for (const Mode& md : modes)
            v += (md.below ? std::sinh(md.rate * t) / md.rate : std::sin(md.rate * t) / md.rate) * md.pf;
        for (std::size_t i = 0; i < nuf.size(); ++i) v += propagator_symbol(t, density.grid.lambda[i]) * nuf[i];
        for (std::size_t pi = 0; pi < probes.size(); ++pi)
            tr.values[ti * probes.size() + pi] = v(static_cast<Eigen::Index>(sq.index(probes[pi])));
    }
    return tr;
}

std::vector<double> relative_difference(const Trajectory& a, const Trajectory& b) {
    if (a.probes != b.probes) throw ContractViolation("relative_difference: probe sets differ");
    std::vector<double> out;
    double running = 0.0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < a.times.size(); ++i) {
        for (std::size_t pi = 0; pi < a.probes.size(); ++pi) running = std::max(running, std::abs(a(i, pi)));
        while (j < b.times.size() && b.times[j] < a.times[i] - 1e-9) ++j;
        if (j == b.times.size() || std::abs(b.times[j] - a.times[i]) > 1e-9) continue;
        double d = 0.0;
        for (std::size_t pi = 0; pi < a.probes.size(); ++pi) d = std::max(d, std::abs(a(i, pi) - b(j, pi)));
        out.push_back(running > 0.0 ? d / running : d);
    }
    return out;
}

} // namespace lwave
