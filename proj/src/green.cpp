#include "lwave/green.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lwave/errors.hpp"
#include "lwave/hash.hpp"
#include "lwave/quadrature.hpp"

namespace lwave {

SpectralParameter SpectralParameter::interior(cplx k) {
    if (!(k.imag() > 0.0)) throw ContractViolation("SpectralParameter::interior: Im k must be positive");
    return {k, Approach::Interior};
}

SpectralParameter SpectralParameter::boundary(double k) {
    if (!std::isfinite(k)) throw ContractViolation("SpectralParameter::boundary: k is not finite");
    if (distance_to_branch_points(k) < 1e-9)
        throw ContractViolation("SpectralParameter::boundary: k = " + std::to_string(k) +
                                " is within 1e-9 of a branch point; use log_expansion");
    return {cplx(k, 0.0), Approach::BoundaryFromAbove};
}

SpectralParameter SpectralParameter::from_lambda(cplx lambda) {
    if (lambda.imag() == 0.0) {
        const double l = lambda.real();
        if (l > 0.0) return boundary(std::sqrt(l));
        if (l < 0.0) return interior(cplx(0.0, std::sqrt(-l)));
        throw ContractViolation("SpectralParameter::from_lambda: lambda = 0 is a branch point");
    }
    cplx k = std::sqrt(lambda);
    if (k.imag() < 0.0) k = -k;
    return interior(k);
}

BranchPoint::BranchPoint(int index) : s(index) {
    if (index < -2 || index > 2) throw ContractViolation("BranchPoint: index must lie in {-2, ..., 2}");
}

double BranchPoint::location() const {
    switch (s) {
    case 0: return 0.0;
    case 1: return 2.0;
    case -1: return -2.0;
    case 2: return kSqrt8;
    default: return -kSqrt8;
    }
}

double distance_to_branch_points(cplx k) {
    double d = std::abs(k);
    for (double p : {2.0, -2.0, kSqrt8, -kSqrt8}) d = std::min(d, std::abs(k - p));
    return d;
}

namespace {

struct Breakpoint {
    double where;
    bool sqrt_singular;
};

// A real point of (0, pi) where a(sigma) = 2 (sign +1) or a(sigma) = -2 (sign -1).
struct SingularPoint {
    double where = 0.0;
    int sign = 0;
};

// Points of [0, pi] where a(sigma) = +-2, i.e. where the sigma_2 integral is singular.
// Exact (real) ones get square-root panels; complex ones get geometric grading by their distance.
std::vector<Panel> panels_for(cplx k, bool boundary, int oscillation, SingularPoint& exact) {
    std::vector<Breakpoint> bps{{0.0, false}, {kPi, false}};
    const cplx k2 = k * k;
    const cplx roots[2] = {2.0 * std::asin(k / 2.0), 2.0 * std::asin(std::sqrt(k2 - 4.0) / 2.0)};
    for (int which = 0; which < 2; ++which) {
        const cplx w = roots[which];
        const double r = std::abs(w.real());
        const double width = std::abs(w.imag());
        if (r > kPi) continue;
        if (boundary && width == 0.0) {
            if (r > 0.0 && r < kPi) {
                bps.push_back({r, true});
                exact = {r, which == 0 ? 1 : -1};
            }
            continue;
        }
        if (width > 2.0) continue;
        const double wmin = std::max(width, 1e-15);
        if (r > 0.0 && r < kPi) bps.push_back({r, false});
        for (double d = wmin; d < kPi; d *= 4.0) {
            if (r - d > 0.0) bps.push_back({r - d, false});
            if (r + d < kPi) bps.push_back({r + d, false});
        }
    }
    std::sort(bps.begin(), bps.end(), [](const Breakpoint& a, const Breakpoint& b) { return a.where < b.where; });
    std::vector<Breakpoint> uniq;
    for (const Breakpoint& b : bps) {
        if (!uniq.empty() && b.where - uniq.back().where <= 1e-15 * kPi) {
            uniq.back().sqrt_singular = uniq.back().sqrt_singular || b.sqrt_singular;
            continue;
        }
        uniq.push_back(b);
    }
    const double max_len = kPi / std::max(8, oscillation);
    std::vector<Panel> panels;
    for (std::size_t i = 0; i + 1 < uniq.size(); ++i) {
        const double a = uniq[i].where, b = uniq[i + 1].where;
        if (uniq[i].sqrt_singular) {
            panels.push_back(Panel::sqrt_at(a, b - a));
        } else if (uniq[i + 1].sqrt_singular) {
            panels.push_back(Panel::sqrt_at(b, a - b));
        } else {
            const int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / max_len)));
            for (int p = 0; p < pieces; ++p)
                panels.push_back(Panel::regular(a + (b - a) * p / pieces, a + (b - a) * (p + 1) / pieces));
        }
    }
    return panels;
}

struct Roots {
    cplx z;      // root of z^2 - a z + 1 with |z| < 1 (or its boundary limit)
    cplx s_eff;  // 1/z - z
};

// Constants 4 - k^2 and 8 - k^2 in factored form, accurate near the branch points.
struct BandConstants {
    cplx k2, c4, c8;
    explicit BandConstants(cplx k) : k2(k * k), c4((2.0 - k) * (2.0 + k)), c8((kSqrt8 - k) * (kSqrt8 + k)) {}
};

// a = 4 - 2 cos s1 - k^2 handled through a - 2 and a + 2; each factor is taken from whichever of its two
// equivalent forms avoids cancellation. Next to a real singular point sp, offset = sigma - sp is exact and
// the vanishing factor becomes 4 sin(offset/2) sin(sp + offset/2) (from sin^2 A - sin^2 B = sin(A-B) sin(A+B)).
Roots select_root(double sigma, double offset, const SingularPoint& sp, const BandConstants& bc, bool boundary,
                  double k_sign) {
    const double sh = std::sin(0.5 * sigma), ch = std::cos(0.5 * sigma);
    const double sh2 = 4.0 * sh * sh, ch2 = 4.0 * ch * ch;
    cplx am2 = sh2 >= ch2 ? bc.c4 - ch2 : sh2 - bc.k2;
    cplx ap2 = ch2 >= sh2 ? bc.c4 + sh2 : bc.c8 - ch2;
    if (sp.sign != 0 && !std::isnan(offset)) {
        const double vanishing = 4.0 * std::sin(0.5 * offset) * std::sin(sp.where + 0.5 * offset);
        if (sp.sign > 0)
            am2 = vanishing;
        else
            ap2 = vanishing;
    }
    const cplx a = am2 + 2.0;
    if (boundary && am2.real() < 0.0 && ap2.real() > 0.0) {
        // Both roots on the unit circle; the limit from Im k > 0 picks the one that moves inside.
        const double r = std::sqrt(-am2.real() * ap2.real());
        if (k_sign > 0.0) return {cplx(a.real(), r) / 2.0, cplx(0.0, -r)};
        return {cplx(a.real(), -r) / 2.0, cplx(0.0, r)};
    }
    const cplx root = std::sqrt(am2 * ap2);
    const cplx w1 = (a + root) / 2.0, w2 = (a - root) / 2.0;
    if (std::abs(w1) >= std::abs(w2)) return {1.0 / w1, root};
    return {1.0 / w2, -root};
}

struct OffsetPlan {
    std::vector<std::pair<int, int>> uniq;  // (|d1|, |d2|)
    std::vector<int> map;
    int max1 = 0, max2 = 0;
};

OffsetPlan plan_offsets(const std::vector<Site>& xis) {
    OffsetPlan p;
    for (Site s : xis) {
        const std::pair<int, int> key{std::abs(s.xi1), std::abs(s.xi2)};
        auto it = std::find(p.uniq.begin(), p.uniq.end(), key);
        if (it == p.uniq.end()) {
            p.map.push_back(static_cast<int>(p.uniq.size()));
            p.uniq.push_back(key);
        } else {
            p.map.push_back(static_cast<int>(it - p.uniq.begin()));
        }
        p.max1 = std::max(p.max1, key.first);
        p.max2 = std::max(p.max2, key.second);
    }
    return p;
}

} // namespace

std::vector<cplx> green_eval_many(const SpectralParameter& kp, const std::vector<Site>& xis, const GreenOptions& opt) {
    if (opt.tol < 1e-14) throw ContractViolation("green_eval: tol must be at least 1e-14");
    const cplx k = kp.k();
    if (distance_to_branch_points(k) < 1e-9)
        throw ContractViolation("green_eval: k within 1e-9 of a branch point; use log_expansion");
    if (xis.empty()) return {};
    const OffsetPlan plan = plan_offsets(xis);
    const BandConstants bc(k);
    const bool boundary = kp.on_boundary();
    const double k_sign = k.real() >= 0.0 ? 1.0 : -1.0;
    const int n = static_cast<int>(plan.uniq.size());
    std::vector<cplx> zpow(plan.max2 + 1);
    SingularPoint exact;
    const std::vector<Panel> panels = panels_for(k, boundary, 2 * (plan.max1 + plan.max2), exact);
    VectorIntegrand f = [&](double sigma, double offset, cplx* out) {
        const Roots r = select_root(sigma, offset, exact, bc, boundary, k_sign);
        zpow[0] = 1.0;
        for (int j = 1; j <= plan.max2; ++j) zpow[j] = zpow[j - 1] * r.z;
        const cplx inv = 2.0 / r.s_eff;
        for (int i = 0; i < n; ++i)
            out[i] = std::cos(plan.uniq[i].first * sigma) * zpow[plan.uniq[i].second] * inv;
    };
    QuadratureOptions qo;
    qo.abs_tol = opt.tol;
    qo.max_panels = opt.max_panels;
    QuadratureResult res;
    try {
        res = integrate_adaptive(f, n, panels, qo);
    } catch (const QuadratureFailure& e) {
        char where[96];
        std::snprintf(where, sizeof where, "green_eval at k = %.17g%+.17gi", k.real(), k.imag());
        throw QuadratureFailure(where, e.achieved_error);
    }
    std::vector<cplx> out(xis.size());
    for (std::size_t i = 0; i < xis.size(); ++i) out[i] = res.values[plan.map[i]];
    return out;
}

cplx green_eval(const SpectralParameter& k, Site xi, const GreenOptions& opt) {
    return green_eval_many(k, {xi}, opt)[0];
}

cplx green_eval_richardson(double k, Site xi, int rungs, const GreenOptions& opt) {
    if (rungs < 2) throw ContractViolation("green_eval_richardson: need at least two rungs");
    std::vector<double> eta(rungs);
    std::vector<cplx> val(rungs);
    for (int j = 0; j < rungs; ++j) {
        eta[j] = 1e-2 * std::ldexp(1.0, -j);
        val[j] = green_eval(SpectralParameter::interior(cplx(k, eta[j])), xi, opt);
    }
    // Neville's scheme evaluated at eta = 0.
    for (int level = 1; level < rungs; ++level)
        for (int j = 0; j + level < rungs; ++j)
            val[j] = (eta[j] * val[j + 1] - eta[j + level] * val[j]) / (eta[j] - eta[j + level]);
    return val[0];
}

double green_defect_residual(const SpectralParameter& k, int radius, const GreenOptions& opt) {
    if (radius < 0) throw ContractViolation("green_defect_residual: negative radius");
    const int n = radius + 2;
    std::vector<Site> quadrant;
    for (int b = 0; b < n; ++b)
        for (int a = 0; a < n; ++a) quadrant.push_back({a, b});
    const std::vector<cplx> vals = green_eval_many(k, quadrant, opt);
    LatticeField g(radius + 1);
    for (Site s : g.window().sites())
        g.set(s, vals[static_cast<std::size_t>(std::abs(s.xi2)) * n + std::abs(s.xi1)]);
    const LatticeField lap = laplacian_apply_window(g, radius);
    double worst = 0.0;
    for (Site s : SupportSquare(radius).sites()) {
        const cplx defect = -lap(s) - k.lambda() * g(s) - (s == Site{0, 0} ? 2.0 * kPi : 0.0);
        worst = std::max(worst, std::abs(defect));
    }
    return worst;
}

double green_difference_at_zero(Site xi, const GreenOptions& opt) {
    const int n1 = std::abs(xi.xi1), n2 = std::abs(xi.xi2);
    VectorIntegrand f = [&](double sigma, double, cplx* out) {
        const double sh = std::sin(0.5 * sigma);
        const double am2 = 4.0 * sh * sh;
        const double ap2 = 4.0 + am2;
        const double s = std::sqrt(am2 * ap2);
        const double a = am2 + 2.0;
        const double z = 2.0 / (a + s);
        // z^n - 1 = (z - 1)(1 + z + ... + z^{n-1}) and z - 1 = -(am2 + s) / (a + s), both free of cancellation.
        double geo = 0.0, zp = 1.0;
        for (int j = 0; j < n2; ++j) {
            geo += zp;
            zp *= z;
        }
        const double half = std::sin(0.5 * n1 * sigma);
        const double cm1 = -2.0 * half * half;
        const double zn_m1 = -(am2 + s) / (a + s) * geo;
        const double zn = zp;
        out[0] = 2.0 * (cm1 * zn + zn_m1) / s;
    };
    QuadratureOptions qo;
    qo.abs_tol = opt.tol;
    qo.max_panels = opt.max_panels;
    const int pieces = std::max(8, 2 * (n1 + n2));
    std::vector<Panel> panels;
    for (int p = 0; p < pieces; ++p) panels.push_back(Panel::regular(kPi * p / pieces, kPi * (p + 1) / pieces));
    return integrate_adaptive(f, 1, panels, qo).values[0].real();
}

GreensTable::GreensTable(SpectralParameter k, int m, double tol, std::vector<cplx> quadrant)
    : k_(k), m_(m), tol_(tol), quadrant_(std::move(quadrant)) {
    const std::size_t side = 2 * static_cast<std::size_t>(m) + 1;
    if (m < 0 || quadrant_.size() != side * side) throw ContractViolation("GreensTable: inconsistent size");
}

GreensTable GreensTable::build(const SpectralParameter& k, int m, const GreenOptions& opt) {
    if (m < 0) throw ContractViolation("GreensTable::build: negative m");
    std::vector<Site> offs;
    for (int d2 = 0; d2 <= 2 * m; ++d2)
        for (int d1 = 0; d1 <= 2 * m; ++d1) offs.push_back({d1, d2});
    return GreensTable(k, m, opt.tol, green_eval_many(k, offs, opt));
}

cplx GreensTable::operator()(Site d) const {
    const int a1 = std::abs(d.xi1), a2 = std::abs(d.xi2);
    if (a1 > 2 * m_ || a2 > 2 * m_) throw ContractViolation("GreensTable: offset outside the table");
    return quadrant_[static_cast<std::size_t>(a2) * (2 * m_ + 1) + a1];
}

nlohmann::json GreensTable::to_json() const {
    nlohmann::json offsets = nlohmann::json::array(), values = nlohmann::json::array();
    for (int d2 = -2 * m_; d2 <= 2 * m_; ++d2)
        for (int d1 = -2 * m_; d1 <= 2 * m_; ++d1) {
            const cplx v = (*this)({d1, d2});
            offsets.push_back({d1, d2});
            values.push_back({v.real(), v.imag()});
        }
    return {{"k", {k().k().real(), k().k().imag()}},
            {"approach", k().on_boundary() ? "boundary" : "interior"},
            {"m", m_},
            {"tol", tol_},
            {"offsets", std::move(offsets)},
            {"values", std::move(values)}};
}

GreensTable GreensTable::from_json(const nlohmann::json& j) {
    const cplx k(j.at("k").at(0).get<double>(), j.at("k").at(1).get<double>());
    const bool boundary = j.value("approach", k.imag() == 0.0 ? "boundary" : "interior") == "boundary";
    const SpectralParameter kp = boundary ? SpectralParameter::boundary(k.real()) : SpectralParameter::interior(k);
    const int m = j.at("m").get<int>();
    const auto& offs = j.at("offsets");
    const auto& vals = j.at("values");
    if (offs.size() != vals.size()) throw ConfigError("GreensTable JSON: offsets and values differ in length");
    const int side = 2 * m + 1;
    std::vector<cplx> quadrant(static_cast<std::size_t>(side) * side);
    std::vector<bool> seen(quadrant.size(), false);
    for (std::size_t i = 0; i < offs.size(); ++i) {
        const int d1 = offs[i].at(0).get<int>(), d2 = offs[i].at(1).get<int>();
        if (d1 < 0 || d2 < 0 || d1 > 2 * m || d2 > 2 * m) continue;
        const std::size_t idx = static_cast<std::size_t>(d2) * side + d1;
        quadrant[idx] = cplx(vals[i].at(0).get<double>(), vals[i].at(1).get<double>());
        seen[idx] = true;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end())
        throw ConfigError("GreensTable JSON: missing nonnegative offsets");
    return GreensTable(kp, m, j.at("tol").get<double>(), std::move(quadrant));
}

GreensTableCache::GreensTableCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::filesystem::path GreensTableCache::path_for(const SpectralParameter& k, int m, double tol) const {
    char key[160];
    std::snprintf(key, sizeof key, "%.11e,%.11e,%s,%d,%.3e", k.k().real(), k.k().imag(),
                  k.on_boundary() ? "b" : "i", m, tol);
    char name[40];
    std::snprintf(name, sizeof name, "green_%016llx.json", static_cast<unsigned long long>(fnv1a64(key)));
    return dir_ / name;
}

GreensTable GreensTableCache::get(const SpectralParameter& k, int m, const GreenOptions& opt) {
    const auto path = path_for(k, m, opt.tol);
    if (std::filesystem::exists(path)) {
        try {
            std::ifstream in(path);
            GreensTable t = GreensTable::from_json(nlohmann::json::parse(in));
            if (t.m() == m && std::abs(t.k().k() - k.k()) <= 1e-11 * std::max(1.0, std::abs(k.k())))
                return t;
        } catch (const std::exception&) {
            // Unreadable cache entries are rebuilt below.
        }
    }
    GreensTable t = GreensTable::build(k, m, opt);
    std::ostringstream tag;
    tag << path.filename().string() << ".tmp." << std::hex << fnv1a64(std::to_string(reinterpret_cast<std::uintptr_t>(&t)));
    const auto tmp = dir_ / tag.str();
    {
        std::ofstream out(tmp);
        out << t.to_json().dump();
        if (!out) throw Error("GreensTableCache: cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
    return t;
}

std::vector<cplx> log_ladder(int s, const LadderOptions& opt) {
    std::vector<cplx> kappa(opt.rungs);
    const cplx dir = std::polar(1.0, kPi / 4.0);
    for (int m = 0; m < opt.rungs; ++m) {
        const cplx kap = opt.kappa0 * std::ldexp(1.0, -m) * dir;
        kappa[m] = s >= 0 ? kap : -std::conj(kap);
    }
    return kappa;
}

std::vector<cplx> fit_log_ladder(const std::vector<cplx>& kappa, const std::vector<cplx>& y, int nuisance_order,
                                 double* max_residual) {
    const int rows = static_cast<int>(kappa.size());
    const int cols = 2 + 2 * nuisance_order;
    if (rows < cols) throw ContractViolation("fit_log_ladder: fewer ladder points than parameters");
    Eigen::MatrixXcd a(rows, cols);
    Eigen::VectorXcd b(rows);
    for (int i = 0; i < rows; ++i) {
        const cplx L = std::log(kappa[i]);
        cplx p = 1.0;
        for (int j = 0; j <= nuisance_order; ++j) {
            a(i, 2 * j) = p * L;
            a(i, 2 * j + 1) = p;
            p *= kappa[i];
        }
        b(i) = y[i];
    }
    // Column scaling keeps the kappa^j columns from being swamped.
    Eigen::VectorXd scale(cols);
    for (int c = 0; c < cols; ++c) {
        scale(c) = a.col(c).norm();
        a.col(c) /= scale(c);
    }
    Eigen::VectorXcd x = a.colPivHouseholderQr().solve(b);
    if (max_residual) *max_residual = (a * x - b).cwiseAbs().maxCoeff();
    std::vector<cplx> out(cols);
    for (int c = 0; c < cols; ++c) out[c] = x(c) / scale(c);
    return out;
}

LogExpansion log_expansion(BranchPoint s, Site xi, const LadderOptions& opt) {
    const std::vector<cplx> kappa = log_ladder(s.s, opt);
    std::vector<cplx> y(kappa.size());
    for (std::size_t m = 0; m < kappa.size(); ++m)
        y[m] = green_eval(SpectralParameter::interior(s.location() + kappa[m]), xi, opt.green);
    LogExpansion e{s, xi, {}, {}, 0.0};
    const std::vector<cplx> c = fit_log_ladder(kappa, y, opt.nuisance_order, &e.residual);
    e.u1 = c[0];
    e.u2 = c[1];
    if (!(e.residual <= opt.residual_threshold))
        throw FitFailure("log_expansion at s = " + std::to_string(s.s), e.residual);
    return e;
}

U2GrowthReport u2_growth_check(const std::vector<int>& radii, const LadderOptions& opt) {
    if (radii.size() < 4) throw ContractViolation("u2_growth_check: need at least four radii");
    for (std::size_t i = 0; i < radii.size(); ++i)
        if (radii[i] <= 0 || (i > 0 && radii[i] <= radii[i - 1]))
            throw ContractViolation("u2_growth_check: radii must be positive and increasing");
    U2GrowthReport r;
    r.radii = radii;
    r.u2_origin = log_expansion(BranchPoint(0), {0, 0}, opt).u2;
    const int n = static_cast<int>(radii.size());
    Eigen::MatrixXd a(n, 3);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
        const double d = green_difference_at_zero({radii[i], 0}, opt.green);
        r.u2.push_back(r.u2_origin + d);
        const double x = radii[i];
        a(i, 0) = std::log(x);
        a(i, 1) = 1.0;
        a(i, 2) = 1.0 / (x * x);
        b(i) = r.u2.back().real();
    }
    const Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
    r.slope = c(0);
    r.intercept = cplx(c(1), r.u2_origin.imag());
    r.curvature = c(2);
    for (int i = 0; i < n; ++i) {
        const double res = b(i) - c(0) * a(i, 0) - c(1);
        r.residuals.push_back(res);
    }
    const Eigen::VectorXd full = b - a * c;
    r.max_residual = full.cwiseAbs().maxCoeff();
    return r;
}

} // namespace lwave
