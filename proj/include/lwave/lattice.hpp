#pragma once

// Geometry of Z^2, finitely supported fields, the five-point Laplacian and its symbol.

#include <compare>
#include <complex>
#include <cstddef>
#include <vector>

#include "json.hpp"

namespace lwave {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.141592653589793238462643383279502884;

struct Site {
    int xi1 = 0;
    int xi2 = 0;

    friend constexpr auto operator<=>(const Site&, const Site&) = default;
    friend constexpr Site operator+(Site a, Site b) { return {a.xi1 + b.xi1, a.xi2 + b.xi2}; }
    friend constexpr Site operator-(Site a, Site b) { return {a.xi1 - b.xi1, a.xi2 - b.xi2}; }
    friend constexpr Site operator-(Site a) { return {-a.xi1, -a.xi2}; }
};

/// The square {|xi_1| <= m, |xi_2| <= m}. Sites are enumerated row-major:
/// xi_2 runs slowest from -m to m, xi_1 fastest from -m to m.
class SupportSquare {
public:
    SupportSquare() = default;
    explicit SupportSquare(int m);

    int half_width() const { return m_; }
    std::size_t size() const { return static_cast<std::size_t>(side()) * side(); }
    int side() const { return 2 * m_ + 1; }

    bool contains(Site s) const { return s.xi1 >= -m_ && s.xi1 <= m_ && s.xi2 >= -m_ && s.xi2 <= m_; }
    std::size_t index(Site s) const;
    Site site(std::size_t idx) const;
    std::vector<Site> sites() const;

private:
    int m_ = 0;
};

/// Finitely supported complex field stored densely on a centred square window.
/// Lookups outside the window return exactly zero.
class LatticeField {
public:
    LatticeField() = default;
    explicit LatticeField(int radius);
    LatticeField(int radius, std::vector<cplx> values);

    static LatticeField delta(Site at, double weight = 1.0, int radius = -1);

    int radius() const { return window_.half_width(); }
    const SupportSquare& window() const { return window_; }

    cplx operator()(Site s) const { return window_.contains(s) ? values_[window_.index(s)] : cplx{}; }
    cplx& at(Site s);
    void set(Site s, cplx v) { at(s) = v; }

    const std::vector<cplx>& values() const { return values_; }
    std::vector<cplx>& values() { return values_; }

    /// True when every stored value has an exactly zero imaginary part.
    bool is_real() const;
    /// Smallest half-width m with support inside the square of that half-width (0 for the zero field).
    int support_half_width() const;
    double max_abs() const;

    /// Copy onto a window of a different radius; truncating a nonzero value is a contract violation.
    LatticeField resized(int radius) const;

    LatticeField& operator+=(const LatticeField& other);
    LatticeField& operator*=(cplx s);

private:
    SupportSquare window_{0};
    std::vector<cplx> values_{cplx{}};
};

LatticeField operator+(LatticeField a, const LatticeField& b);
LatticeField operator-(const LatticeField& a, const LatticeField& b);
LatticeField operator*(cplx s, LatticeField a);

/// phi(sigma) = 4 - 2 cos sigma_1 - 2 cos sigma_2, the Fourier multiplier of -Delta.
double symbol_eval(double sigma1, double sigma2);

/// Delta u for a finitely supported u; the result lives on radius + 1.
LatticeField laplacian_apply(const LatticeField& u);

/// Delta applied to window samples of a function that need not vanish outside the window.
/// Every output site needs its four neighbours inside the samples, so out_radius + 1 <= samples.radius().
LatticeField laplacian_apply_window(const LatticeField& samples, int out_radius);

/// (-Delta + q) u for finitely supported u and q.
LatticeField hamiltonian_apply(const LatticeField& q, const LatticeField& u);

/// Bilinear pairing sum u(xi) w(xi).
cplx pairing(const LatticeField& u, const LatticeField& w);
/// Hermitian product sum conj(u(xi)) w(xi).
cplx inner(const LatticeField& u, const LatticeField& w);
/// sum over xi of |u(xi+e1)-u(xi)|^2 + |u(xi+e2)-u(xi)|^2.
double dirichlet_form(const LatticeField& u);

void to_json(nlohmann::json& j, const LatticeField& f);
void from_json(const nlohmann::json& j, LatticeField& f);

} // namespace lwave
