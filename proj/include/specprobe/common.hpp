#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace specprobe {

using Complex = std::complex<double>;

/// Configuration or precondition violation (bad window, bad support, ...).
/// CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numerical stage failed (no convergence, singular time, box exit, ...).
/// CLI maps this to exit code 3.
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

/// n geometrically spaced values from a down to b (inclusive), a, b > 0.
std::vector<double> geomspace(double a, double b, int n);

/// n linearly spaced values from a to b (inclusive).
std::vector<double> linspace(double a, double b, int n);

/// Nodes and weights of the m-point Gauss-Legendre rule on [-1, 1].
/// Computed once per order by Newton iteration and cached.
struct GaussLegendre {
    std::vector<double> node;
    std::vector<double> weight;
};
const GaussLegendre& gauss_legendre(int m);

/// Integrate f over [a, b] with a composite Gauss-Legendre rule
/// (panels subintervals, order-m rule on each).
template <typename F>
auto integrate_gl(F&& f, double a, double b, int panels, int m = 16)
    -> decltype(f(0.0)) {
    const GaussLegendre& gl = gauss_legendre(m);
    decltype(f(0.0)) acc{};
    const double w = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double lo = a + p * w;
        const double mid = lo + 0.5 * w;
        for (int q = 0; q < m; ++q)
            acc += (0.5 * w * gl.weight[q]) * f(mid + 0.5 * w * gl.node[q]);
    }
    return acc;
}

/// FNV-1a 64-bit hash, used for stable config fingerprints in provenance.
std::uint64_t fnv1a64(const std::string& s);
std::string fnv1a64_hex(const std::string& s);

/// Least-squares line fit y ~= c0 + c1*x. Returns {c0, c1, rms_residual}.
struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double rms = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace specprobe
