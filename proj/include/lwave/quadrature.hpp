#pragma once

// Adaptive Gauss-Kronrod quadrature for vector-valued complex integrands on an interval.

#include <complex>
#include <functional>
#include <vector>

namespace lwave {

using cplx = std::complex<double>;

/// Fills out[0..n) with the integrand components at x. On Sqrt panels offset = h u^2 = x - c exactly,
/// which lets integrands near the singular point avoid forming x - c in floating point; elsewhere it is NaN.
using VectorIntegrand = std::function<void(double x, double offset, cplx* out)>;

/// A panel in a reparametrised variable u in [u0, u1].
/// Regular: x = u. Sqrt: x = c + h u^2, which absorbs a 1/sqrt(x - c) endpoint singularity at u = 0.
struct Panel {
    enum class Kind { Regular, Sqrt };
    Kind kind = Kind::Regular;
    double u0 = 0.0, u1 = 0.0;
    double c = 0.0, h = 0.0;

    static Panel regular(double a, double b) { return {Kind::Regular, a, b, 0.0, 0.0}; }
    /// Covers [c, c + len] (len > 0) or [c + len, c] (len < 0) with the singular end at c.
    static Panel sqrt_at(double c, double len) { return {Kind::Sqrt, 0.0, 1.0, c, len}; }
};

struct QuadratureOptions {
    double abs_tol = 1e-12;
    int max_panels = 20000;
};

struct QuadratureResult {
    std::vector<cplx> values;
    double error_estimate = 0.0;
    int panels = 0;
};

/// Integrates all n components over the union of the initial panels, bisecting the panel with the
/// largest Kronrod error until the summed estimate is below abs_tol. Throws QuadratureFailure.
QuadratureResult integrate_adaptive(const VectorIntegrand& f, int n, const std::vector<Panel>& initial,
                                    const QuadratureOptions& opt = {});

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

} // namespace lwave
