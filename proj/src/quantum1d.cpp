#include "specprobe/quantum1d.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace specprobe {

namespace {

/// Number of eigenvalues of the tridiagonal matrix strictly below x,
/// by the sign count of the LDL^T pivot recurrence.
long sturm_below(const Eigen::VectorXd& diag, double off2, double x) {
    long cnt = 0;
    double prev = 1.0;
    const int n = static_cast<int>(diag.size());
    for (int i = 0; i < n; ++i) {
        double d = diag[i] - x - (i == 0 ? 0.0 : off2 / prev);
        if (std::abs(d) < 1e-300) d = -1e-300;  // zero pivot counts as below
        if (d < 0.0) ++cnt;
        prev = d;
    }
    return cnt;
}

struct Level {
    Eigen::VectorXd diag;
    double off2 = 0.0;
};

Level build_level(const Potential& pot, double h, double box, int n) {
    Level lv;
    const double dx = 2.0 * box / (n + 1);
    const double t = h * h / (dx * dx);
    lv.off2 = t * t;
    lv.diag.resize(n);
    for (int i = 0; i < n; ++i) lv.diag[i] = 2.0 * t + pot.value1(-box + (i + 1) * dx);
    return lv;
}

/// lambda_j (0-based global index) of one level by bisection on the count,
/// bracketed by [lo, hi] with count(lo) <= j < count(hi).
double bisect_index(const Level& lv, long j, double lo, double hi) {
    while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        if (sturm_below(lv.diag, lv.off2, mid) <= j)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// A cut is stable when every level reports the same count on both sides of
/// a small guard gap: no eigenvalue of any refinement level sits near the
/// cut, so global indices line up across levels. Starting from x0 the cut
/// slides outward (dir = -1 lower cut, +1 upper) until stable.
double stable_cut(const std::vector<Level>& lvs, double x0, double guard,
                  double shift, int dir, long* count_out) {
    for (int k = 0; k < 12; ++k) {
        const double x = x0 + dir * shift * k;
        long c0 = -1;
        bool ok = true;
        for (const Level& lv : lvs) {
            const long cl = sturm_below(lv.diag, lv.off2, x - guard);
            const long cr = sturm_below(lv.diag, lv.off2, x + guard);
            if (cl != cr || (c0 >= 0 && cl != c0)) {
                ok = false;
                break;
            }
            c0 = cl;
        }
        if (ok) {
            *count_out = c0;
            return x;
        }
    }
    throw SolverError("eigen_window: no stable spectral cut found near the window edge");
}

}  // namespace

double auto_box(const Potential& pot, double e_top, double h) {
    if (pot.dim() != 1) throw ConfigError("auto_box: one-dimensional potentials only");
    if (!std::isfinite(e_top)) throw ConfigError("auto_box: non-finite energy cap");
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("auto_box: h must be positive");
    const double L0 = pot.box_half_width();
    const int pts = 4096;
    const double need_action = 14.0 * h;

    double radius = 0.0;
    for (int side = 0; side < 2; ++side) {
        const double sgn = side == 0 ? 1.0 : -1.0;
        std::vector<double> v(pts);
        for (int i = 0; i < pts; ++i) v[i] = pot.value1(sgn * L0 * (i + 1) / pts);
        // barrier radius: beyond it V never drops under 2*e_top again
        int barrier = pts;
        for (int i = pts - 1; i >= 0; --i) {
            if (v[i] < 2.0 * e_top) break;
            barrier = i;
        }
        if (barrier == pts)
            throw ConfigError(
                "auto_box: the potential box cannot confine the requested energy "
                "window (V stays below twice the window top)");
        // tunneling action from the outermost classical turning point
        int turn = 0;
        for (int i = 0; i < pts; ++i)
            if (v[i] <= e_top) turn = i + 1;
        double action = 0.0;
        int agmon = pts;
        const double step = L0 / pts;
        double prev = 0.0;
        for (int i = turn; i < pts; ++i) {
            const double g = std::sqrt(std::max(v[i] - e_top, 0.0));
            action += 0.5 * (prev + g) * step;
            prev = g;
            if (action >= need_action) {
                agmon = i;
                break;
            }
        }
        if (agmon == pts)
            throw ConfigError("auto_box: tunneling barrier inside the box is too thin for this h");
        const int cut = std::max(barrier, agmon);
        radius = std::max(radius, L0 * (cut + 1) / pts);
    }
    return std::min(radius, L0);
}

DiscretizedOperator discretize(PotentialPtr pot, double h, double L, int N,
                               double e_top) {
    if (!pot) throw ConfigError("discretize: null potential");
    if (pot->dim() != 1) throw ConfigError("discretize: one-dimensional potentials only");
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("discretize: h must be positive");
    if (!(L > 0.0) || L > pot->box_half_width() + 1e-12)
        throw ConfigError("discretize: box must be positive and inside the potential's domain");
    if (!std::isfinite(e_top)) throw ConfigError("discretize: non-finite energy cap");
    const double n_min = 20.0 * L / h;
    if (N < n_min)
        throw ConfigError(fmt::format(
            "discretize: N={} violates the resolution rule dx <= h/10 (need N >= {:.0f})",
            N, std::ceil(n_min)));
    if (pot->value1(-L) < e_top || pot->value1(L) < e_top)
        throw ConfigError(fmt::format(
            "discretize: box edge potential {:g} sits below the window top {:g}",
            std::min(pot->value1(-L), pot->value1(L)), e_top));

    DiscretizedOperator op;
    op.pot = std::move(pot);
    op.h = h;
    op.box = L;
    op.n_interior = N;
    op.dx = 2.0 * L / (N + 1);
    op.offdiag = -h * h / (op.dx * op.dx);
    op.diag.resize(N);
    const double t = h * h / (op.dx * op.dx);
    for (int i = 0; i < N; ++i) op.diag[i] = 2.0 * t + op.pot->value1(-L + (i + 1) * op.dx);
    op.e_top = e_top;
    return op;
}

DiscretizedOperator discretize_auto(PotentialPtr pot, double h, double e_top) {
    if (!pot) throw ConfigError("discretize_auto: null potential");
    const double L = auto_box(*pot, e_top, h);
    const int n = static_cast<int>(std::ceil(20.0 * L / h));
    return discretize(std::move(pot), h, L, n, e_top);
}

Spectrum eigen_window(const DiscretizedOperator& op, double a, double b) {
    if (!op.pot) throw ConfigError("eigen_window: empty operator");
    if (!std::isfinite(a) || !std::isfinite(b) || a > b)
        throw ConfigError("eigen_window: invalid window");
    if (b > op.e_top + 1e-12)
        throw ConfigError(fmt::format(
            "eigen_window: window top {:g} exceeds the operator's energy cap {:g}", b, op.e_top));
    const double v_edge = std::min(op.pot->value1(-op.box), op.pot->value1(op.box));
    if (b > 0.8 * v_edge)
        throw ConfigError(fmt::format(
            "eigen_window: window top {:g} is above the boundary-artifact threshold {:g} "
            "(0.8 of the edge potential)",
            b, 0.8 * v_edge));

    // three nested grids; halving dx keeps old grid points valid
    std::vector<Level> lvs;
    const int n0 = op.n_interior;
    const int sizes[3] = {n0, 2 * n0 + 1, 4 * n0 + 3};
    for (int k = 0; k < 3; ++k) lvs.push_back(build_level(*op.pot, op.h, op.box, sizes[k]));

    const double span = std::max(b - a, 1e-6);
    const double pad = 0.02 * span + 1e-3;
    const double guard = 2e-4;
    long c_probe = sturm_below(lvs[0].diag, lvs[0].off2, b) -
                   sturm_below(lvs[0].diag, lvs[0].off2, a);
    const double shift = std::max(3.0 * guard, 0.13 * span / static_cast<double>(std::max<long>(1, c_probe)));

    long c_bot = 0, c_top = 0;
    const double cut_lo = stable_cut(lvs, a - pad, guard, shift, -1, &c_bot);
    const double cut_hi = stable_cut(lvs, b + pad, guard, shift, +1, &c_top);

    Spectrum spec;
    spec.h = op.h;
    spec.window_lo = a;
    spec.window_hi = b;
    spec.box = op.box;
    spec.n_grid = op.n_interior;
    if (c_top <= c_bot) return spec;  // empty window

    const long m = c_top - c_bot;
    std::vector<std::array<double, 3>> lam(static_cast<std::size_t>(m));
    for (int k = 0; k < 3; ++k)
        for (long j = 0; j < m; ++j)
            lam[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] =
                bisect_index(lvs[static_cast<std::size_t>(k)], c_bot + j, cut_lo, cut_hi);

    for (long j = 0; j < m; ++j) {
        const auto& l = lam[static_cast<std::size_t>(j)];
        const double r1 = (4.0 * l[1] - l[0]) / 3.0;
        const double r2 = (4.0 * l[2] - l[1]) / 3.0;
        const double ext = (16.0 * r2 - r1) / 15.0;
        const double conv = std::abs(ext - r2);
        if (conv > 1e-6 * std::max(1.0, std::abs(ext)))
            throw SolverError(fmt::format(
                "eigen_window: eigenvalue near {:g} moved {:g} between refinement "
                "levels, above the 1e-6 tolerance",
                ext, conv));
        if (ext >= a && ext <= b) {
            spec.eigenvalues.push_back(ext);
            spec.convergence.push_back(conv);
        }
    }
    return spec;
}

int count_eigenvalues(const Spectrum& spec, double a, double b) {
    if (!std::isfinite(a) || !std::isfinite(b) || a > b)
        throw ConfigError("count_eigenvalues: invalid interval");
    if (a < spec.window_lo - 1e-12 || b > spec.window_hi + 1e-12)
        throw ConfigError("count_eigenvalues: interval leaves the computed window");
    const auto lo = std::lower_bound(spec.eigenvalues.begin(), spec.eigenvalues.end(), a);
    const auto hi = std::upper_bound(spec.eigenvalues.begin(), spec.eigenvalues.end(), b);
    return static_cast<int>(hi - lo);
}

double liouville_volume(const Potential& pot, double a, double b, double* rel_err) {
    if (pot.dim() != 1) throw ConfigError("liouville_volume: one-dimensional potentials only");
    if (!std::isfinite(a) || !std::isfinite(b) || a > b)
        throw ConfigError("liouville_volume: invalid energy interval");
    const double box = pot.box_half_width();
    if (pot.value1(-box) <= b || pot.value1(box) <= b)
        throw ConfigError("liouville_volume: the sublevel set is not confined in the box");

    auto slice = [&](double x) {
        const double v = pot.value1(x);
        const double hi = b - v;
        const double lo = a - v;
        const double shi = hi > 0.0 ? std::sqrt(hi) : 0.0;
        const double slo = lo > 0.0 ? std::sqrt(lo) : 0.0;
        return 2.0 * (shi - slo);
    };
    const double v1 = integrate_gl(slice, -box, box, 2000, 8);
    const double v2 = integrate_gl(slice, -box, box, 4000, 8);
    double re = 0.0;
    if (v2 != 0.0 || v1 != 0.0) re = std::abs(v2 - v1) / std::max(std::abs(v2), 1e-300);
    if (rel_err) *rel_err = re;
    if (re > 1e-3)
        throw SolverError("liouville_volume: quadrature failed to converge to 1e-3");
    return v2;
}

double liouville_surface(const Potential& pot, double E) {
    if (pot.dim() != 1) throw ConfigError("liouville_surface: one-dimensional potentials only");
    const double box = pot.box_half_width();
    double vmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 2048; ++i)
        vmin = std::min(vmin, pot.value1(-box + 2.0 * box * i / 2048));
    const double floor = vmin - 1.0;
    const double d = 1e-3 * std::max(1.0, std::abs(E));
    const double vp = liouville_volume(pot, floor, E + d);
    const double vm = liouville_volume(pot, floor, E - d);
    return (vp - vm) / (2.0 * d);
}

}  // namespace specprobe
