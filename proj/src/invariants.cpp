#include "specprobe/invariants.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

namespace specprobe {

namespace {

void validate_nk(int n, int k, const char* where) {
    if (n < 1) throw ConfigError(fmt::format("{}: dimension n must be >= 1", where));
    if (k < 1) throw ConfigError(fmt::format("{}: half-degree k must be >= 1", where));
}

// Oscillation scale of phi is set by the extent of the transform support.
double kernel_t_scale(const TestFunction& tf) {
    return std::max({1.0, std::abs(tf.support_lo()), std::abs(tf.support_hi())});
}

}  // namespace

SingularityClass classify_singularity(int n, int k, ExtremumType type) {
    validate_nk(n, k, "classify_singularity");
    SingularityClass c;
    c.n = n;
    c.k = k;
    c.type = type;
    c.alpha = n * (1.0 - k) / (2.0 * k);
    if (type == ExtremumType::minimum) {
        c.m = 0;
        c.tag = SingularCase::minimum;
        return c;
    }
    const bool gamma_integer = (n * (k + 1)) % (2 * k) == 0;
    if (!gamma_integer) {
        c.m = 0;
        c.tag = SingularCase::max_generic;
    } else if (n % 2 == 1) {
        c.m = 1;
        c.tag = SingularCase::max_log;
    } else {
        c.m = 0;
        c.tag = SingularCase::max_even_integer;
    }
    return c;
}

std::vector<SingularityClass> singularity_table(int n_max, int k_max) {
    validate_nk(n_max, k_max, "singularity_table");
    std::vector<SingularityClass> table;
    table.reserve(static_cast<size_t>(n_max) * k_max * 2);
    for (int n = 1; n <= n_max; ++n)
        for (int k = 1; k <= k_max; ++k) {
            table.push_back(classify_singularity(n, k, ExtremumType::minimum));
            table.push_back(classify_singularity(n, k, ExtremumType::maximum));
        }
    return table;
}

Complex min_functional(const TestFunction& tf, int n, int k) {
    validate_nk(n, k, "min_functional");
    // The kernel is numerically supported in |s| <= s_max, so the quarter
    // plane truncates to u <= sqrt(s_max), v <= s_max^(1/2k); what is cut
    // carries the kernel's certified tail weight (below quadrature error).
    // Panel counts follow the oscillation rate of phi composed
    // with u^2 resp. v^(2k), which is fastest at the far corner.
    const double smax = tf.s_max();
    const double u_max = std::sqrt(smax);
    const double v_max = std::pow(smax, 1.0 / (2.0 * k));
    const double tscale = kernel_t_scale(tf);
    const int nu = std::clamp(static_cast<int>(12.0 * u_max * tscale), 24, 4000);
    const int nv = std::clamp(static_cast<int>(12.0 * v_max * tscale), 24, 4000);

    auto inner = [&](double u) {
        auto f = [&](double v) {
            Complex val = tf.phi(u * u + std::pow(v, 2.0 * k));
            double w = 1.0;
            for (int i = 0; i < n - 1; ++i) w *= u * v;
            return w * val;
        };
        return integrate_gl(f, 0.0, v_max, nv);
    };
    return integrate_gl(inner, 0.0, u_max, nu);
}

Complex one_sided_moment(const TestFunction& tf, double gamma, int sign,
                         double shift) {
    if (!(gamma > 0.0))
        throw ConfigError("one_sided_moment: gamma must be positive");
    if (sign != 1 && sign != -1)
        throw ConfigError("one_sided_moment: sign must be +1 or -1");
    const double t_top = std::max(2.0, tf.s_max() + std::abs(shift));
    const double tscale = kernel_t_scale(tf);
    auto f = [&](double t) {
        return std::pow(t, gamma - 1.0) * tf.phi(sign * t + shift);
    };

    // Smooth body: plain panels sized to the oscillation of phi.
    const int body_panels = std::clamp(
        static_cast<int>(4.0 * (t_top - 1.0) * tscale), 8, 20000);
    Complex total = integrate_gl(f, 1.0, t_top, body_panels);

    // Endpoint wedge (0, 1]: t^(gamma-1) may blow up at 0, but it is
    // analytic on every dyadic block [2^-(j+1), 2^-j], so fixed-order
    // panels per block converge geometrically. Depth chosen so the
    // remaining mass below the last block is ~1e-15 of scale.
    const int depth = std::clamp(static_cast<int>(std::ceil(50.0 / gamma)), 8, 400);
    double hi = 1.0;
    for (int j = 0; j < depth; ++j) {
        const double lo = 0.5 * hi;
        total += integrate_gl(f, lo, hi, 4);
        hi = lo;
    }
    return total;
}

MaxFunctionals max_functionals(const TestFunction& tf, int n, int k) {
    validate_nk(n, k, "max_functionals");
    MaxFunctionals out;
    out.gamma = n * (k + 1.0) / (2.0 * k);
    out.i_plus = one_sided_moment(tf, out.gamma, +1, 0.0);
    out.i_minus = one_sided_moment(tf, out.gamma, -1, 0.0);
    return out;
}

PseudoInvariant pseudo_invariant(int n, int k, const TestFunction& tf,
                                 double p1_shift, ExtremumType type) {
    validate_nk(n, k, "pseudo_invariant");
    if (k % 2 != 0 || k <= 2)
        throw ConfigError(fmt::format(
            "pseudo_invariant: the homogeneous degree k must be even and > 2, got {}",
            k));
    PseudoInvariant out;
    out.exponent = 2.0 * n / k - n;
    const double gamma = 2.0 * n / k;  // moment weight t^(gamma - 1)
    const int sign = type == ExtremumType::minimum ? +1 : -1;
    out.t_functional =
        one_sided_moment(tf, gamma, sign, p1_shift) / static_cast<double>(k);
    return out;
}

TestFunction subprincipal_shift_hook(const TestFunction& tf, double p1_at_z0) {
    return tf.shifted(p1_at_z0);
}

}  // namespace specprobe
