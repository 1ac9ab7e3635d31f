#include "lwave/lattice.hpp"

#include <algorithm>
#include <cmath>

#include "lwave/errors.hpp"

namespace lwave {

SupportSquare::SupportSquare(int m) : m_(m) {
    if (m < 0) throw ContractViolation("SupportSquare: negative half-width");
}

std::size_t SupportSquare::index(Site s) const {
    if (!contains(s)) throw ContractViolation("SupportSquare::index: site outside the square");
    return static_cast<std::size_t>(s.xi2 + m_) * side() + static_cast<std::size_t>(s.xi1 + m_);
}

Site SupportSquare::site(std::size_t idx) const {
    const int n = side();
    return {static_cast<int>(idx % n) - m_, static_cast<int>(idx / n) - m_};
}

std::vector<Site> SupportSquare::sites() const {
    std::vector<Site> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(site(i));
    return out;
}

LatticeField::LatticeField(int radius) : window_(radius), values_(window_.size()) {}

LatticeField::LatticeField(int radius, std::vector<cplx> values) : window_(radius), values_(std::move(values)) {
    if (values_.size() != window_.size())
        throw ContractViolation("LatticeField: value count does not match (2m+1)^2");
}

LatticeField LatticeField::delta(Site at, double weight, int radius) {
    const int need = std::max(std::abs(at.xi1), std::abs(at.xi2));
    LatticeField f(radius < 0 ? need : radius);
    f.at(at) = weight;
    return f;
}

cplx& LatticeField::at(Site s) {
    if (!window_.contains(s)) throw ContractViolation("LatticeField::at: site outside the stored window");
    return values_[window_.index(s)];
}

bool LatticeField::is_real() const {
    return std::all_of(values_.begin(), values_.end(), [](cplx v) { return v.imag() == 0.0; });
}

int LatticeField::support_half_width() const {
    int m = 0;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (values_[i] == cplx{}) continue;
        const Site s = window_.site(i);
        m = std::max({m, std::abs(s.xi1), std::abs(s.xi2)});
    }
    return m;
}

double LatticeField::max_abs() const {
    double m = 0.0;
    for (cplx v : values_) m = std::max(m, std::abs(v));
    return m;
}

LatticeField LatticeField::resized(int radius) const {
    LatticeField out(radius);
    for (std::size_t i = 0; i < values_.size(); ++i) {
        const Site s = window_.site(i);
        if (out.window().contains(s))
            out.at(s) = values_[i];
        else if (values_[i] != cplx{})
            throw ContractViolation("LatticeField::resized: nonzero value would be truncated");
    }
    return out;
}

LatticeField& LatticeField::operator+=(const LatticeField& other) {
    if (other.radius() > radius()) *this = resized(other.radius());
    for (std::size_t i = 0; i < other.values_.size(); ++i) at(other.window_.site(i)) += other.values_[i];
    return *this;
}

LatticeField& LatticeField::operator*=(cplx s) {
    for (cplx& v : values_) v *= s;
    return *this;
}

LatticeField operator+(LatticeField a, const LatticeField& b) { return a += b; }

LatticeField operator-(const LatticeField& a, const LatticeField& b) {
    LatticeField nb = b;
    nb *= -1.0;
    return a + nb;
}

LatticeField operator*(cplx s, LatticeField a) { return a *= s; }

double symbol_eval(double sigma1, double sigma2) { return 4.0 - 2.0 * std::cos(sigma1) - 2.0 * std::cos(sigma2); }

namespace {

constexpr Site kNeighbours[4] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};

LatticeField stencil(const LatticeField& u, int out_radius) {
    LatticeField out(out_radius);
    const SupportSquare& w = out.window();
    for (std::size_t i = 0; i < w.size(); ++i) {
        const Site s = w.site(i);
        cplx acc = -4.0 * u(s);
        for (Site e : kNeighbours) acc += u(s + e);
        out.values()[i] = acc;
    }
    return out;
}

} // namespace

LatticeField laplacian_apply(const LatticeField& u) { return stencil(u, u.radius() + 1); }

LatticeField laplacian_apply_window(const LatticeField& samples, int out_radius) {
    if (out_radius < 0 || out_radius + 1 > samples.radius())
        throw ContractViolation("laplacian_apply_window: output radius " + std::to_string(out_radius) +
                                " needs samples of radius " + std::to_string(out_radius + 1) + ", have " +
                                std::to_string(samples.radius()));
    return stencil(samples, out_radius);
}

LatticeField hamiltonian_apply(const LatticeField& q, const LatticeField& u) {
    LatticeField out = laplacian_apply(u);
    out *= -1.0;
    const SupportSquare& w = u.window();
    for (std::size_t i = 0; i < w.size(); ++i) {
        const Site s = w.site(i);
        out.at(s) += q(s) * u.values()[i];
    }
    return out;
}

cplx pairing(const LatticeField& u, const LatticeField& w) {
    cplx acc{};
    for (std::size_t i = 0; i < u.values().size(); ++i) acc += u.values()[i] * w(u.window().site(i));
    return acc;
}

cplx inner(const LatticeField& u, const LatticeField& w) {
    cplx acc{};
    for (std::size_t i = 0; i < u.values().size(); ++i) acc += std::conj(u.values()[i]) * w(u.window().site(i));
    return acc;
}

double dirichlet_form(const LatticeField& u) {
    // Differences touching the window from outside are taken against the implicit zeros.
    double acc = 0.0;
    const int r = u.radius() + 1;
    for (int x2 = -r; x2 <= r; ++x2)
        for (int x1 = -r; x1 <= r; ++x1) {
            const Site s{x1, x2};
            acc += std::norm(u(s + Site{1, 0}) - u(s)) + std::norm(u(s + Site{0, 1}) - u(s));
        }
    return acc;
}

void to_json(nlohmann::json& j, const LatticeField& f) {
    nlohmann::json vals = nlohmann::json::array();
    for (cplx v : f.values()) vals.push_back({v.real(), v.imag()});
    j = nlohmann::json{{"m", f.radius()}, {"values", std::move(vals)}};
}

void from_json(const nlohmann::json& j, LatticeField& f) {
    const int m = j.at("m").get<int>();
    const auto& vals = j.at("values");
    if (m < 0) throw ConfigError("LatticeField JSON: negative m");
    const std::size_t n = static_cast<std::size_t>(2 * m + 1) * (2 * m + 1);
    if (!vals.is_array() || vals.size() != n)
        throw ConfigError("LatticeField JSON: expected " + std::to_string(n) + " values for m = " + std::to_string(m));
    std::vector<cplx> v;
    v.reserve(n);
    for (const auto& pair : vals) {
        if (!pair.is_array() || pair.size() != 2) throw ConfigError("LatticeField JSON: values must be [re, im] pairs");
        v.emplace_back(pair[0].get<double>(), pair[1].get<double>());
    }
    f = LatticeField(m, std::move(v));
}

} // namespace lwave
