#include "specprobe/common.hpp"

#include <map>
#include <mutex>

#include <fmt/format.h>

namespace specprobe {

std::vector<double> geomspace(double a, double b, int n) {
    if (n < 2 || a <= 0.0 || b <= 0.0)
        throw ConfigError("geomspace needs n >= 2 and positive endpoints");
    std::vector<double> v(n);
    const double r = std::log(b / a) / (n - 1);
    for (int i = 0; i < n; ++i) v[i] = a * std::exp(r * i);
    v.back() = b;
    return v;
}

std::vector<double> linspace(double a, double b, int n) {
    if (n < 2) throw ConfigError("linspace needs n >= 2");
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
    v.back() = b;
    return v;
}

namespace {

GaussLegendre make_gauss_legendre(int m) {
    GaussLegendre gl;
    gl.node.resize(m);
    gl.weight.resize(m);
    // Roots of P_m by Newton iteration from the Chebyshev-like initial guess.
    for (int i = 0; i < (m + 1) / 2; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (m + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            // Evaluate P_m(x) and P'_m(x) by the three-term recurrence.
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= m; ++k) {
                const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = m * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        gl.node[i] = -x;
        gl.node[m - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * pp * pp);
        gl.weight[i] = w;
        gl.weight[m - 1 - i] = w;
    }
    return gl;
}

}  // namespace

const GaussLegendre& gauss_legendre(int m) {
    static std::mutex mu;
    static std::map<int, GaussLegendre> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(m);
    if (it == cache.end()) it = cache.emplace(m, make_gauss_legendre(m)).first;
    return it->second;
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string fnv1a64_hex(const std::string& s) {
    return fmt::format("{:016x}", fnv1a64(s));
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw ConfigError("fit_line needs >= 2 matching samples");
    const int n = static_cast<int>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double det = n * sxx - sx * sx;
    if (std::abs(det) < 1e-300) throw ConfigError("fit_line: degenerate abscissae");
    LineFit f;
    f.slope = (n * sxy - sx * sy) / det;
    f.intercept = (sy - f.slope * sx) / n;
    double ss = 0;
    for (int i = 0; i < n; ++i) {
        const double r = y[i] - f.intercept - f.slope * x[i];
        ss += r * r;
    }
    f.rms = std::sqrt(ss / n);
    return f;
}

}  // namespace specprobe
