#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace lwave {

namespace detail {
inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}
} // namespace detail

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (window too small, bad site, ...).
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Adaptive quadrature stopped before reaching the requested tolerance.
class QuadratureFailure : public Error {
public:
    QuadratureFailure(const std::string& what, double achieved)
        : Error(what + " (achieved error " + detail::format_number(achieved) + ")"), achieved_error(achieved) {}
    double achieved_error;
};

/// The T-matrix is numerically singular; usually the spectral parameter sits on an eigenvalue.
class NearSingular : public Error {
public:
    NearSingular(const std::string& what, double sigma_min)
        : Error(what + " (smallest singular value " + detail::format_number(sigma_min) + ")"),
          smallest_singular_value(sigma_min) {}
    double smallest_singular_value;
};

/// A least-squares fit did not reach its residual threshold.
class FitFailure : public Error {
public:
    FitFailure(const std::string& what, double res)
        : Error(what + " (residual " + detail::format_number(res) + ")"), residual(res) {}
    double residual;
};

/// An eigenvalue bracket touched the end of the scanned range.
class ScanBoundary : public Error {
public:
    using Error::Error;
};

/// Chebyshev coefficients did not decay before the degree cap.
class DegreeCapReached : public Error {
public:
    DegreeCapReached(const std::string& what, double last_coeff)
        : Error(what + " (last coefficient " + detail::format_number(last_coeff) + ")"), last_coefficient(last_coeff) {}
    double last_coefficient;
};

/// Time stepping saw signal near the window edge early enough to pollute the probes.
class BoundaryContamination : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A stage input produced by an earlier stage is missing.
class DependencyError : public Error {
public:
    using Error::Error;
};

} // namespace lwave
