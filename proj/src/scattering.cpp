#include "lwave/scattering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "lwave/errors.hpp"
#include "lwave/quadrature.hpp"

namespace lwave {

namespace {

nlohmann::json matrix_json(const MatrixC& a) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < a.cols(); ++j) row.push_back({a(i, j).real(), a(i, j).imag()});
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::VectorXd singular_values(const MatrixC& a) { return Eigen::JacobiSVD<MatrixC>(a).singularValues(); }

} // namespace

ScatteringProblem::ScatteringProblem(LatticeField potential, int half_width) : m(half_width) {
    if (half_width < potential.support_half_width())
        throw ContractViolation("ScatteringProblem: potential support exceeds the square S");
    if (!potential.is_real()) throw ContractViolation("ScatteringProblem: potential must be real-valued");
    q = potential.resized(half_width);
}

std::pair<double, double> ScatteringProblem::spectral_bounds() const {
    double lo = 0.0, hi = 0.0;
    for (cplx v : q.values()) {
        lo = std::min(lo, v.real());
        hi = std::max(hi, v.real());
    }
    return {lo, 8.0 + hi};
}

GreensTable green_table(const SpectralParameter& k, int m, const ScatteringOptions& opt) {
    if (opt.cache) return opt.cache->get(k, m, opt.green);
    return GreensTable::build(k, m, opt.green);
}

MatrixC free_kernel(const GreensTable& table, double scale) {
    const SupportSquare sq(table.m());
    const auto n = static_cast<Eigen::Index>(sq.size());
    MatrixC k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) k(i, j) = scale * table(sq.site(i) - sq.site(j));
    return k;
}

cplx TMatrix::determinant() const { return entries.determinant(); }

double TMatrix::smallest_singular_value() const {
    const Eigen::VectorXd sv = singular_values(entries);
    return sv(sv.size() - 1);
}

TMatrix build_tmatrix(const ScatteringProblem& p, const GreensTable& table, const ScatteringOptions& opt) {
    if (table.m() != p.m) throw ContractViolation("build_tmatrix: table half-width differs from S");
    MatrixC t = free_kernel(table, opt.kernel_scale);
    for (Eigen::Index i = 0; i < t.rows(); ++i) t.row(i) *= p.q_at(static_cast<std::size_t>(i));
    t += MatrixC::Identity(t.rows(), t.cols());
    return {table.k(), std::move(t)};
}

TMatrix build_tmatrix(const ScatteringProblem& p, const SpectralParameter& k, const ScatteringOptions& opt) {
    return build_tmatrix(p, green_table(k, p.m, opt), opt);
}

TruncatedResolvent truncated_resolvent(const ScatteringProblem& p, const GreensTable& table,
                                       const ScatteringOptions& opt) {
    const TMatrix t = build_tmatrix(p, table, opt);
    const Eigen::VectorXd sv = singular_values(t.entries);
    const double smin = sv(sv.size() - 1);
    // T = I + K, so the identity sets the scale even when every singular value is small (e.g. 1 x 1).
    if (smin < 1e-10 * std::max(1.0, sv(0))) throw NearSingular("truncated_resolvent: T is numerically singular", smin);
    const MatrixC kern = free_kernel(table, opt.kernel_scale);
    // R^ = K T^{-1}, computed as (T^{-T} K^T)^T with K symmetric.
    MatrixC r = t.entries.transpose().partialPivLu().solve(kern).transpose();
    return {table.k(), std::move(r)};
}

TruncatedResolvent truncated_resolvent(const ScatteringProblem& p, const SpectralParameter& k,
                                       const ScatteringOptions& opt) {
    return truncated_resolvent(p, green_table(k, p.m, opt), opt);
}

LatticeField reconstruct_full_solution(const ScatteringProblem& p, const SpectralParameter& k, const LatticeField& f,
                                       int radius, const ScatteringOptions& opt) {
    if (f.support_half_width() > p.m) throw ContractViolation("reconstruct_full_solution: f not supported in S");
    const SupportSquare sq(p.m);
    const auto n = static_cast<Eigen::Index>(sq.size());
    const TruncatedResolvent rh = truncated_resolvent(p, k, opt);
    Eigen::VectorXcd fv(n);
    for (Eigen::Index i = 0; i < n; ++i) fv(i) = f(sq.site(i));
    const Eigen::VectorXcd rf = rh.entries * fv;
    Eigen::VectorXcd g(n);
    for (Eigen::Index i = 0; i < n; ++i) g(i) = fv(i) - p.q_at(i) * rf(i);

    const int reach = radius + p.m;
    std::vector<Site> offs;
    for (int d2 = 0; d2 <= reach; ++d2)
        for (int d1 = 0; d1 <= reach; ++d1) offs.push_back({d1, d2});
    const std::vector<cplx> gv = green_eval_many(k, offs, opt.green);
    auto gat = [&](Site d) {
        return gv[static_cast<std::size_t>(std::abs(d.xi2)) * (reach + 1) + std::abs(d.xi1)];
    };
    LatticeField u(radius);
    const SupportSquare& w = u.window();
    for (std::size_t a = 0; a < w.size(); ++a) {
        const Site xi = w.site(a);
        cplx acc{};
        for (Eigen::Index b = 0; b < n; ++b)
            if (g(b) != cplx{}) acc += gat(xi - sq.site(b)) * g(b);
        u.values()[a] = opt.kernel_scale * acc;
    }
    return u;
}

double correspondence_residual(const ScatteringProblem& p, const SpectralParameter& k, const LatticeField& f,
                               int radius, const ScatteringOptions& opt) {
    const LatticeField u = reconstruct_full_solution(p, k, f, radius + 1, opt);
    const LatticeField lap = laplacian_apply_window(u, radius);
    const cplx k2 = k.lambda();
    double worst = 0.0;
    for (std::size_t a = 0; a < lap.window().size(); ++a) {
        const Site xi = lap.window().site(a);
        const cplx lhs = -lap.values()[a] + (p.q(xi) - k2) * u(xi);
        worst = std::max(worst, std::abs(lhs - f(xi)));
    }
    return worst;
}

namespace {

// Birman-Schwinger inertia: with A = -Delta - lambda definite and Q supported on P, the Schur complement
// of A + Q onto P is (A^{-1})_PP^{-1} + Q_P. Below the band A > 0, so negative eigenvalues of H - lambda
// match negative eigenvalues of the complement; above the band A < 0 and the positive ones match.
Eigen::VectorXd complement_spectrum(const ScatteringProblem& p, const SpectralParameter& k,
                                    const ScatteringOptions& opt) {
    const SupportSquare sq(p.m);
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < sq.size(); ++i)
        if (p.q_at(i) != 0.0) active.push_back(i);
    if (active.empty()) return {};
    const GreensTable table = green_table(k, p.m, opt);
    const auto n = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd kern(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            kern(i, j) = opt.kernel_scale * table(sq.site(active[i]) - sq.site(active[j])).real();
    Eigen::MatrixXd mtx = kern.inverse();
    for (Eigen::Index i = 0; i < n; ++i) mtx(i, i) += p.q_at(active[i]);
    mtx = 0.5 * (mtx + mtx.transpose()).eval();
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(mtx, Eigen::EigenvaluesOnly).eigenvalues();
}

} // namespace

int count_below(const ScatteringProblem& p, double sigma, const ScatteringOptions& opt) {
    const Eigen::VectorXd ev = complement_spectrum(p, SpectralParameter::interior(cplx(0.0, sigma)), opt);
    return static_cast<int>((ev.array() < 0.0).count());
}

int count_above(const ScatteringProblem& p, double rho, const ScatteringOptions& opt) {
    if (!(rho > kSqrt8)) throw ContractViolation("count_above: rho must exceed sqrt 8");
    const Eigen::VectorXd ev = complement_spectrum(p, SpectralParameter::boundary(rho), opt);
    return static_cast<int>((ev.array() > 0.0).count());
}

MatrixC residue_projection(const ScatteringProblem& p, double lambda0, double radius, int nodes,
                           const ScatteringOptions& opt) {
    const auto n = static_cast<Eigen::Index>(p.size());
    MatrixC acc = MatrixC::Zero(n, n);
    for (int j = 0; j < nodes; ++j) {
        const double theta = 2.0 * kPi * j / nodes;
        const cplx e = std::polar(1.0, theta);
        cplx lambda = lambda0 + radius * e;
        if (j == 0 || 2 * j == nodes) lambda = cplx(lambda.real(), 0.0);
        acc += truncated_resolvent(p, SpectralParameter::from_lambda(lambda), opt).entries * e;
    }
    return -(radius / nodes) * acc;
}

namespace {

struct Root {
    double x;
    int multiplicity;
};

// Locates the jumps of a nonincreasing integer function on [a, b] to the given width in lambda.
void bisect_jumps(const std::function<int(double)>& count, double a, double b, int ca, int cb,
                  const std::function<double(double, double)>& lambda_width, double resolution,
                  std::vector<Root>& out) {
    if (ca == cb) return;
    if (lambda_width(a, b) <= resolution) {
        out.push_back({0.5 * (a + b), ca - cb});
        return;
    }
    const double mid = 0.5 * (a + b);
    if (!(mid > a && mid < b)) {
        out.push_back({mid, ca - cb});
        return;
    }
    const int cm = count(mid);
    bisect_jumps(count, a, mid, ca, cm, lambda_width, resolution, out);
    bisect_jumps(count, mid, b, cm, cb, lambda_width, resolution, out);
}

std::vector<Root> scan_jumps(const std::function<int(double)>& count, double lo, double hi, double step,
                             const std::function<double(double, double)>& lambda_width, double resolution) {
    std::vector<Root> roots;
    const int steps = std::max(1, static_cast<int>(std::ceil((hi - lo) / step)));
    double a = lo;
    int ca = count(a);
    for (int i = 1; i <= steps; ++i) {
        const double b = lo + (hi - lo) * i / steps;
        const int cb = count(b);
        if (cb > ca) throw Error("scan_jumps: eigenvalue count increased along the scan");
        bisect_jumps(count, a, b, ca, cb, lambda_width, resolution, roots);
        a = b;
        ca = cb;
    }
    return roots;
}

ExceptionalFlag exceptional_test(const ScatteringProblem& p, int s, const ScatteringOptions& opt) {
    const double ks = BranchPoint(s).location();
    ExceptionalFlag flag;
    flag.lambda = ks * ks;
    std::vector<double> xs, ys;
    for (double eta : {1e-3, 1e-4, 1e-5, 1e-6}) {
        const cplx k(ks, eta);
        const double dist = std::abs(ks * ks - k * k);
        try {
            const TruncatedResolvent r = truncated_resolvent(p, SpectralParameter::interior(k), opt);
            xs.push_back(-std::log(dist));
            ys.push_back(std::log(singular_values(r.entries)(0)));
        } catch (const NearSingular&) {
            flag.suspected = true;
            flag.growth_exponent = 1.0;
            return flag;
        }
    }
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    flag.growth_exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    flag.suspected = flag.growth_exponent > 0.5;
    return flag;
}

} // namespace

DiscreteSpectrum find_discrete_spectrum(const ScatteringProblem& p, const SpectrumOptions& opt) {
    DiscreteSpectrum out;
    out.m = p.m;
    const auto [lo, hi] = p.spectral_bounds();
    const ScatteringOptions& so = opt.scattering;

    if (lo < 0.0) {
        double sigma_max = std::sqrt(-lo) + 0.05;
        auto count = [&](double sigma) { return count_below(p, sigma, so); };
        if (count(sigma_max) != 0) {
            sigma_max *= 2.0;
            if (count(sigma_max) != 0) throw ScanBoundary("find_discrete_spectrum: eigenvalues below the scan range");
        }
        auto width = [](double a, double b) { return b * b - a * a; };
        for (const Root& r : scan_jumps(count, opt.sigma_min, sigma_max, opt.scan_step, width, opt.lambda_resolution)) {
            Eigenvalue e;
            e.rate = r.x;
            e.lambda = -r.x * r.x;
            e.multiplicity = r.multiplicity;
            out.negatives.push_back(e);
        }
    }
    if (hi > 8.0) {
        const double rho_min = kSqrt8 + 1e-6;
        double rho_max = std::sqrt(hi) + 0.05;
        auto count = [&](double rho) { return count_above(p, rho, so); };
        if (count(rho_max) != 0) {
            rho_max *= 1.5;
            if (count(rho_max) != 0) throw ScanBoundary("find_discrete_spectrum: eigenvalues above the scan range");
        }
        auto width = [](double a, double b) { return b * b - a * a; };
        for (const Root& r : scan_jumps(count, rho_min, rho_max, opt.scan_step, width, opt.lambda_resolution)) {
            Eigenvalue e;
            e.rate = r.x;
            e.lambda = r.x * r.x;
            e.multiplicity = r.multiplicity;
            out.aboves.push_back(e);
        }
    }
    auto by_lambda = [](const Eigenvalue& a, const Eigenvalue& b) { return a.lambda < b.lambda; };
    std::sort(out.negatives.begin(), out.negatives.end(), by_lambda);
    std::sort(out.aboves.begin(), out.aboves.end(), by_lambda);

    if (opt.compute_projections) {
        for (auto* list : {&out.negatives, &out.aboves})
            for (Eigenvalue& e : *list) {
                // Shrink the circle if a neighbouring eigenvalue or the band is too close.
                double r = opt.contour_radius;
                for (const auto* other : {&out.negatives, &out.aboves})
                    for (const Eigenvalue& o : *other)
                        if (&o != &e) r = std::min(r, 0.25 * std::abs(o.lambda - e.lambda));
                r = std::min(r, 0.25 * std::min(std::abs(e.lambda), std::abs(e.lambda - 8.0)));
                e.projection = residue_projection(p, e.lambda, r, opt.contour_nodes, so);
            }
    }
    for (int s = 0; s < 3; ++s) {
        out.exceptional[s].lambda = 4.0 * s;
        if (opt.check_exceptional) out.exceptional[s] = exceptional_test(p, s, so);
    }
    return out;
}

nlohmann::json DiscreteSpectrum::to_json() const {
    auto list = [](const std::vector<Eigenvalue>& v, const char* rate_name) {
        nlohmann::json a = nlohmann::json::array();
        for (const Eigenvalue& e : v) {
            nlohmann::json j{{"lambda", e.lambda}, {rate_name, e.rate}, {"multiplicity", e.multiplicity}};
            if (e.projection.size() > 0) j["projection"] = matrix_json(e.projection);
            a.push_back(std::move(j));
        }
        return a;
    };
    nlohmann::json ex = nlohmann::json::array();
    for (const ExceptionalFlag& f : exceptional)
        ex.push_back({{"lambda", f.lambda}, {"suspected", f.suspected}, {"growth_exponent", f.growth_exponent}});
    return {{"m", m}, {"negatives", list(negatives, "sigma")}, {"aboves", list(aboves, "rho")}, {"exceptional", ex}};
}

InteriorReport verify_no_interior_eigenvalues(const ScatteringProblem& p, int nodes, const ScatteringOptions& opt) {
    if (nodes < 2) throw ContractViolation("verify_no_interior_eigenvalues: need at least two nodes");
    const int half = nodes / 2;
    std::vector<double> lambdas;
    for (int j = 0; j < half; ++j) lambdas.push_back(4.0 * (j + 0.5) / half);
    for (int j = 0; j < nodes - half; ++j) lambdas.push_back(4.0 + 4.0 * (j + 0.5) / (nodes - half));
    std::vector<double> smin(lambdas.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < lambdas.size(); ++i)
        smin[i] = build_tmatrix(p, SpectralParameter::boundary(std::sqrt(lambdas[i])), opt).smallest_singular_value();
    InteriorReport rep;
    rep.nodes = static_cast<int>(lambdas.size());
    const auto it = std::min_element(smin.begin(), smin.end());
    rep.min_singular_value = *it;
    rep.argmin_lambda = lambdas[static_cast<std::size_t>(it - smin.begin())];
    rep.pass = rep.min_singular_value > 1e-6;
    return rep;
}

LambdaGrid LambdaGrid::graded(const Spec& spec) {
    if (!(spec.smallest_gap > 1e-6) || spec.grading_limit <= spec.smallest_gap || spec.order < 2)
        throw ContractViolation("LambdaGrid::graded: inconsistent grid specification");
    std::vector<double> gx, gw;
    gauss_legendre(spec.order, gx, gw);
    LambdaGrid g;
    auto add_panel = [&](double a, double b) {
        for (int i = 0; i < spec.order; ++i) {
            g.lambda.push_back(0.5 * (a + b) + 0.5 * (b - a) * gx[i]);
            g.weight.push_back(0.5 * (b - a) * gw[i]);
        }
    };
    // Least-squares fit of c0 + c1 log|x - e| on the first graded panel, integrated over the cap of width d.
    auto add_cap = [&](double e, double d, std::size_t first) {
        Eigen::MatrixXd basis(spec.order, 2);
        for (int i = 0; i < spec.order; ++i) {
            basis(i, 0) = 1.0;
            basis(i, 1) = std::log(std::abs(g.lambda[first + i] - e));
        }
        Eigen::RowVector2d moments(d, d * std::log(d) - d);
        const Eigen::MatrixXd pinv = basis.completeOrthogonalDecomposition().pseudoInverse();
        const Eigen::RowVectorXd extra = moments * pinv;
        for (int i = 0; i < spec.order; ++i) g.weight[first + i] += extra(i);
    };
    for (double a : {0.0, 4.0}) {
        const double b = a + 4.0;
        // Left end, graded outward from a.
        const std::size_t first_left = g.lambda.size();
        double x = spec.smallest_gap;
        while (x < spec.grading_limit) {
            const double nx = std::min(2.0 * x, spec.grading_limit);
            add_panel(a + x, a + nx);
            x = nx;
        }
        add_cap(a, spec.smallest_gap, first_left);
        const double inner_a = a + spec.grading_limit, inner_b = b - spec.grading_limit;
        const int pieces = static_cast<int>(std::ceil((inner_b - inner_a) / spec.max_panel));
        for (int p = 0; p < pieces; ++p)
            add_panel(inner_a + (inner_b - inner_a) * p / pieces, inner_a + (inner_b - inner_a) * (p + 1) / pieces);
        // Right end, graded inward toward b; panels are emitted left to right.
        std::vector<std::pair<double, double>> right;
        x = spec.smallest_gap;
        while (x < spec.grading_limit) {
            const double nx = std::min(2.0 * x, spec.grading_limit);
            right.emplace_back(b - nx, b - x);
            x = nx;
        }
        std::reverse(right.begin(), right.end());
        for (std::size_t i = 0; i < right.size(); ++i) {
            if (i + 1 == right.size()) {
                const std::size_t first_right = g.lambda.size();
                add_panel(right[i].first, right[i].second);
                add_cap(b, spec.smallest_gap, first_right);
            } else {
                add_panel(right[i].first, right[i].second);
            }
        }
    }
    return g;
}

MatrixC SpectralDensity::integrate(const std::function<double(double)>& g) const {
    if (nu.empty()) return {};
    MatrixC acc = MatrixC::Zero(nu[0].rows(), nu[0].cols());
    for (std::size_t i = 0; i < nu.size(); ++i) acc += (grid.weight[i] * g(grid.lambda[i])) * nu[i];
    return acc;
}

void SpectralDensity::write_csv(std::ostream& out) const {
    if (nu.empty()) return;
    const Eigen::Index n = nu[0].rows();
    out << "lambda";
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) out << ",re_" << i << "_" << j << ",im_" << i << "_" << j;
    out << "\n";
    char buf[64];
    for (std::size_t a = 0; a < nu.size(); ++a) {
        std::snprintf(buf, sizeof buf, "%.17g", grid.lambda[a]);
        out << buf;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                std::snprintf(buf, sizeof buf, ",%.17g,%.17g", nu[a](i, j).real(), nu[a](i, j).imag());
                out << buf;
            }
        out << "\n";
    }
}

SpectralDensity spectral_density(const ScatteringProblem& p, const LambdaGrid& grid, const ScatteringOptions& opt) {
    for (double l : grid.lambda)
        for (double e : {0.0, 4.0, 8.0})
            if (std::abs(l - e) < 1e-6)
                throw ContractViolation("spectral_density: grid node " + std::to_string(l) + " within 1e-6 of " +
                                        std::to_string(e));
    SpectralDensity d;
    d.grid = grid;
    d.nu.resize(grid.lambda.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < grid.lambda.size(); ++i) {
        const MatrixC r = truncated_resolvent(p, SpectralParameter::boundary(std::sqrt(grid.lambda[i])), opt).entries;
        d.nu[i] = r.imag().cast<cplx>() / kPi;
    }
    return d;
}

namespace {

struct Term {
    int alpha, beta;
    bool operator==(const Term& o) const { return alpha == o.alpha && beta == o.beta; }
};

cplx term_value(const Term& t, cplx kappa) {
    const cplx l = std::log(kappa);
    return std::pow(kappa, t.alpha) * std::pow(l, t.beta);
}

// Leading term first, then its log-companion and the regular nuisance terms, without duplicates or constants.
std::vector<Term> model_terms(int alpha, int beta, bool with_constant) {
    std::vector<Term> terms;
    auto push = [&](Term t) {
        if (t.alpha >= 0 && t.beta == 0 && t.alpha == 0 && !with_constant) return;
        if (std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(t);
    };
    push({alpha, beta});
    push({alpha, beta - 1});
    push({alpha, beta - 2});
    push({1, 0});
    push({1, 1});
    push({2, 0});
    push({2, 1});
    if (with_constant) push({0, 0});
    return terms;
}

struct CandidateFit {
    int alpha, beta;
    double residual;
    double leading_share;
};

} // namespace

BranchClassification classify_branch_points(const ScatteringProblem& p, const DiscreteSpectrum* spectrum,
                                            const BranchOptions& opt) {
    (void)spectrum;
    BranchClassification out;
    const auto n = static_cast<Eigen::Index>(p.size());
    const Eigen::Index entries = n * n;
    for (int s = -2; s <= 2; ++s) {
        const BranchPoint bp(s);
        const std::vector<cplx> kappa = log_ladder(s, opt.ladder);
        // For s < 0 the ladder is the mirror -conj(kappa) and the model is written in -kappa' = conj(kappa):
        // log(-kappa') differs from log(kappa') by a constant, which leaves the leading coefficient unchanged,
        // and the basis stays the exact conjugate of the s > 0 basis.
        std::vector<cplx> basis_var(kappa);
        if (s < 0)
            for (cplx& v : basis_var) v = -v;
        const int rungs = static_cast<int>(kappa.size());
        Eigen::MatrixXcd data(rungs, entries);
        for (int m = 0; m < rungs; ++m) {
            const MatrixC r =
                truncated_resolvent(p, SpectralParameter::interior(bp.location() + kappa[m]), opt.scattering).entries;
            data.row(m) = Eigen::Map<const Eigen::RowVectorXcd>(r.data(), entries);
        }
        const Eigen::MatrixXcd diff = data.topRows(rungs - 1) - data.bottomRows(rungs - 1);
        Eigen::VectorXd diff_norm(entries);
        for (Eigen::Index j = 0; j < entries; ++j) diff_norm(j) = diff.col(j).norm();
        const double diff_max = diff_norm.maxCoeff();

        // Every entry is classified on its own: entries of R^ can carry different leading terms (for example a
        // parity zero of the free log coefficient), and the matrix exponent is the most singular one present.
        std::vector<std::vector<CandidateFit>> per_entry(static_cast<std::size_t>(entries));
        for (int alpha = -2; alpha <= 3; ++alpha)
            for (int beta = -3; beta <= 3; ++beta) {
                if (alpha >= 0 && beta == 0) continue;
                const std::vector<Term> terms = model_terms(alpha, beta, false);
                const auto cols = static_cast<Eigen::Index>(terms.size());
                if (cols >= rungs - 1) continue;
                Eigen::MatrixXcd design(rungs - 1, cols);
                for (int m = 0; m + 1 < rungs; ++m)
                    for (Eigen::Index c = 0; c < cols; ++c)
                        design(m, c) = term_value(terms[c], basis_var[m]) - term_value(terms[c], basis_var[m + 1]);
                for (Eigen::Index c = 0; c < cols; ++c) design.col(c) /= design.col(c).norm();
                const Eigen::MatrixXcd coef = design.colPivHouseholderQr().solve(diff);
                const Eigen::MatrixXcd fitted = design * coef;
                for (Eigen::Index j = 0; j < entries; ++j) {
                    const double fitted_norm = fitted.col(j).norm();
                    const double lead = (design.col(0) * coef(0, j)).norm();
                    per_entry[static_cast<std::size_t>(j)].push_back(
                        {alpha, beta, diff_norm(j) > 0 ? (diff.col(j) - fitted.col(j)).norm() / diff_norm(j) : 0.0,
                         fitted_norm > 0 ? lead / fitted_norm : 0.0});
                }
            }

        struct EntryChoice {
            bool valid = false;
            CandidateFit best{}, runner{};
            bool has_runner = false;
        };
        auto more_singular = [](const CandidateFit& a, const CandidateFit& b) {
            return a.alpha != b.alpha ? a.alpha < b.alpha : a.beta > b.beta;
        };
        std::vector<EntryChoice> choice(static_cast<std::size_t>(entries));
        bool any = false;
        CandidateFit leading{};
        for (Eigen::Index j = 0; j < entries; ++j) {
            if (!(diff_norm(j) >= 1e-3 * diff_max) || diff_max == 0.0) continue;
            std::vector<CandidateFit> valid;
            for (const CandidateFit& c : per_entry[static_cast<std::size_t>(j)])
                if (c.leading_share >= opt.validity_fraction) valid.push_back(c);
            if (valid.empty()) continue;
            std::sort(valid.begin(), valid.end(),
                      [](const CandidateFit& a, const CandidateFit& b) { return a.residual < b.residual; });
            EntryChoice& ch = choice[static_cast<std::size_t>(j)];
            ch.valid = true;
            ch.best = valid[0];
            if (valid.size() > 1) {
                ch.runner = valid[1];
                ch.has_runner = true;
            }
            if (!any || more_singular(ch.best, leading)) leading = ch.best;
            any = true;
        }
        BranchFit fit;
        fit.s = s;
        if (!any) {
            fit.ambiguous = true;
            fit.leading = MatrixC::Zero(n, n);
            out.fits.push_back(fit);
            continue;
        }
        fit.alpha = leading.alpha;
        fit.beta = leading.beta;
        double dominant = -1.0;
        for (Eigen::Index j = 0; j < entries; ++j) {
            const EntryChoice& ch = choice[static_cast<std::size_t>(j)];
            if (!ch.valid || ch.best.alpha != fit.alpha || ch.best.beta != fit.beta) continue;
            fit.residual = std::max(fit.residual, ch.best.residual);
            if (ch.has_runner) {
                if (ch.runner.residual <= (1.0 + opt.ambiguity_margin) * ch.best.residual) fit.ambiguous = true;
                if (diff_norm(j) > dominant) {
                    dominant = diff_norm(j);
                    fit.runner_up_alpha = ch.runner.alpha;
                    fit.runner_up_beta = ch.runner.beta;
                    fit.runner_up_residual = ch.runner.residual;
                }
            }
        }
        // Leading matrix from undifferenced data with a constant.
        const std::vector<Term> terms = model_terms(fit.alpha, fit.beta, true);
        const auto cols = static_cast<Eigen::Index>(terms.size());
        Eigen::MatrixXcd design(rungs, cols);
        for (int m = 0; m < rungs; ++m)
            for (Eigen::Index c = 0; c < cols; ++c) design(m, c) = term_value(terms[c], basis_var[m]);
        Eigen::VectorXd scale(cols);
        for (Eigen::Index c = 0; c < cols; ++c) {
            scale(c) = design.col(c).norm();
            design.col(c) /= scale(c);
        }
        const Eigen::MatrixXcd coef = design.colPivHouseholderQr().solve(data);
        // (kappa')^alpha = (-1)^alpha (-kappa')^alpha converts back to powers of k - k_s.
        const double sign = (s < 0 && (fit.alpha % 2 != 0)) ? -1.0 : 1.0;
        Eigen::RowVectorXcd lead = coef.row(0) * (sign / scale(0));
        // Entries whose own leading term is weaker carry no coefficient at this order.
        for (Eigen::Index j = 0; j < entries; ++j) {
            const EntryChoice& ch = choice[static_cast<std::size_t>(j)];
            if (!ch.valid || ch.best.alpha != fit.alpha || ch.best.beta != fit.beta) lead(j) = 0.0;
        }
        fit.leading = Eigen::Map<const MatrixC>(lead.data(), n, n);
        out.fits.push_back(fit);
    }
    return out;
}

nlohmann::json BranchClassification::to_json() const {
    nlohmann::json a = nlohmann::json::array();
    for (const BranchFit& f : fits) {
        a.push_back({{"s", f.s},
                     {"alpha", f.alpha},
                     {"beta", f.beta},
                     {"ambiguous", f.ambiguous},
                     {"residual", f.residual},
                     {"runner_up", {{"alpha", f.runner_up_alpha}, {"beta", f.runner_up_beta}, {"residual", f.runner_up_residual}}},
                     {"leading", matrix_json(f.leading)}});
    }
    return a;
}

} // namespace lwave
