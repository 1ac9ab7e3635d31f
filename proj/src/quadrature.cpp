#include "lwave/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "lwave/errors.hpp"

namespace lwave {

namespace {

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21 constants).
constexpr double kXgk[11] = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452, 0.930157491355708226001207180059508,
    0.865063366688984510732096688423493, 0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784, 0.294392862701460198131126603103866,
    0.148874338981631210884826001129720, 0.000000000000000000000000000000000};
constexpr double kWgk[11] = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390, 0.054755896574351996031381300244580,
    0.075039674810919952767043140916190, 0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208980484952, 0.134709217311473325928054001771707, 0.142775938577060080797094273138717,
    0.147739104901338491374841515972068, 0.149445554002916905664936468389821};
constexpr double kWg[5] = {0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
                           0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
                           0.295524224714752870173892994651338};

struct Evaluated {
    Panel panel;
    std::vector<cplx> kronrod;
    double error = 0.0;
    bool operator<(const Evaluated& o) const { return error < o.error; }
};

Evaluated evaluate(const VectorIntegrand& f, int n, const Panel& p, std::vector<cplx>& buf) {
    Evaluated ev{p, std::vector<cplx>(n), 0.0};
    std::vector<cplx> gauss(n);
    const double mid = 0.5 * (p.u0 + p.u1);
    const double half = 0.5 * (p.u1 - p.u0);
    auto accumulate = [&](double u, double wk, double wg) {
        double x = u, jac = half, offset = std::numeric_limits<double>::quiet_NaN();
        if (p.kind == Panel::Kind::Sqrt) {
            offset = p.h * u * u;
            x = p.c + offset;
            jac *= 2.0 * std::abs(p.h) * u;
        }
        f(x, offset, buf.data());
        for (int i = 0; i < n; ++i) {
            ev.kronrod[i] += wk * jac * buf[i];
            gauss[i] += wg * jac * buf[i];
        }
    };
    accumulate(mid, kWgk[10], 0.0);
    for (int idx = 0; idx < 10; ++idx) {
        // Gauss abscissae are the odd Kronrod indices.
        const double wg = (idx % 2 == 1) ? kWg[idx / 2] : 0.0;
        accumulate(mid - half * kXgk[idx], kWgk[idx], wg);
        accumulate(mid + half * kXgk[idx], kWgk[idx], wg);
    }
    for (int i = 0; i < n; ++i) ev.error = std::max(ev.error, std::abs(ev.kronrod[i] - gauss[i]));
    return ev;
}

} // namespace

QuadratureResult integrate_adaptive(const VectorIntegrand& f, int n, const std::vector<Panel>& initial,
                                    const QuadratureOptions& opt) {
    std::vector<cplx> buf(n);
    std::priority_queue<Evaluated> heap;
    double total_err = 0.0;
    for (const Panel& p : initial) {
        Evaluated ev = evaluate(f, n, p, buf);
        total_err += ev.error;
        heap.push(std::move(ev));
    }
    int panels = static_cast<int>(heap.size());
    while (total_err > opt.abs_tol && !heap.empty()) {
        if (panels >= opt.max_panels)
            throw QuadratureFailure("integrate_adaptive: panel budget exhausted", total_err);
        Evaluated worst = heap.top();
        heap.pop();
        const double um = 0.5 * (worst.panel.u0 + worst.panel.u1);
        Panel left = worst.panel, right = worst.panel;
        left.u1 = um;
        right.u0 = um;
        if (!(um > worst.panel.u0 && um < worst.panel.u1))
            throw QuadratureFailure("integrate_adaptive: panel width underflow", total_err);
        Evaluated el = evaluate(f, n, left, buf);
        Evaluated er = evaluate(f, n, right, buf);
        total_err += el.error + er.error - worst.error;
        heap.push(std::move(el));
        heap.push(std::move(er));
        ++panels;
        // Running sums drift; recompute exactly once the estimate looks converged.
        if (total_err <= opt.abs_tol) {
            auto copy = heap;
            total_err = 0.0;
            while (!copy.empty()) {
                total_err += copy.top().error;
                copy.pop();
            }
        }
    }
    QuadratureResult res;
    res.values.assign(n, cplx{});
    res.error_estimate = total_err;
    res.panels = panels;
    // Sum in a fixed order (sorted by panel position) so results do not depend on heap history.
    std::vector<Evaluated> all;
    all.reserve(heap.size());
    while (!heap.empty()) {
        all.push_back(heap.top());
        heap.pop();
    }
    std::sort(all.begin(), all.end(), [](const Evaluated& a, const Evaluated& b) {
        if (a.panel.c != b.panel.c) return a.panel.c < b.panel.c;
        if (a.panel.h != b.panel.h) return a.panel.h < b.panel.h;
        return a.panel.u0 < b.panel.u0;
    });
    for (const Evaluated& e : all)
        for (int i = 0; i < n; ++i) res.values[i] += e.kronrod[i];
    return res;
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    if (n < 1) throw ContractViolation("gauss_legendre: n must be positive");
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(3.141592653589793 * (i + 0.75) / (n + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
}

} // namespace lwave
