#include "specprobe/classical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace specprobe {

namespace {

void check_phase_dims(const Potential& pot, const PhasePoint& z, const char* where) {
    if (z.x.size() != pot.dim() || z.xi.size() != pot.dim())
        throw ConfigError(fmt::format(
            "{}: phase point has dimensions ({}, {}) but the potential expects {}",
            where, z.x.size(), z.xi.size(), pot.dim()));
}

Eigen::VectorXd pack1(double x) {
    Eigen::VectorXd v(1);
    v[0] = x;
    return v;
}

double hess_spectral_norm(const Potential& pot, const Eigen::VectorXd& x) {
    if (pot.dim() == 1) return std::abs(pot.hessian1(x[0]));
    Eigen::MatrixXd h = pot.hessian(x);
    Eigen::MatrixXd sym = 0.5 * (h + h.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    double m = 0.0;
    for (int i = 0; i < sym.rows(); ++i) m = std::max(m, std::abs(es.eigenvalues()[i]));
    return m;
}

struct CurvatureScan {
    double sup_norm = 0.0;  // grid sup of ||d^2 V|| over {V <= level}
    bool touches_boundary = false;
    bool empty = true;
    double spacing = 0.0;
};

/// Dense-grid supremum of the Hessian spectral norm over the accessible
/// region {V <= level} inside the box. Only the position projection matters:
/// any xi with |xi|^2 + V in the window exists as soon as V <= level.
CurvatureScan scan_curvature(const Potential& pot, double level) {
    const int n = pot.dim();
    const double box = pot.box_half_width();
    const int pts = n == 1 ? 8001 : (n == 2 ? 257 : 65);
    CurvatureScan out;
    out.spacing = 2.0 * box / (pts - 1);
    const std::vector<double> axis = linspace(-box, box, pts);

    if (n == 1) {
        for (int i = 0; i < pts; ++i) {
            if (pot.value1(axis[i]) > level) continue;
            out.empty = false;
            if (i == 0 || i == pts - 1) out.touches_boundary = true;
            out.sup_norm = std::max(out.sup_norm, std::abs(pot.hessian1(axis[i])));
        }
        return out;
    }

    Eigen::VectorXd x(n);
    std::vector<int> idx(n, 0);
    while (true) {
        for (int d = 0; d < n; ++d) x[d] = axis[idx[d]];
        if (pot.value(x) <= level) {
            out.empty = false;
            for (int d = 0; d < n; ++d)
                if (idx[d] == 0 || idx[d] == pts - 1) out.touches_boundary = true;
            out.sup_norm = std::max(out.sup_norm, hess_spectral_norm(pot, x));
        }
        int d = 0;
        while (d < n && ++idx[d] == pts) {
            idx[d] = 0;
            ++d;
        }
        if (d == n) break;
    }
    return out;
}

struct VerletOut {
    FlowResult res;
    double max_drift = 0.0;
};

VerletOut run_verlet_1d(const Potential& pot, double x0, double xi0, double t_end,
                        bool with_monodromy, double step, int max_samples) {
    VerletOut out;
    const double box = pot.box_half_width();
    const double e0 = xi0 * xi0 + pot.value1(x0);
    const long nsteps = t_end == 0.0 ? 0 : static_cast<long>(std::ceil(std::abs(t_end) / step));
    const double h = nsteps == 0 ? 0.0 : t_end / nsteps;
    const long stride = std::max<long>(1, nsteps / (max_samples - 1));
    out.res.dt = h;

    double x = x0, xi = xi0;
    // monodromy rows: (dx, dxi) as functions of (dx0, dxi0)
    double mxx = 1.0, mxxi = 0.0, mxix = 0.0, mxixi = 1.0;
    auto record = [&](double tk) {
        out.res.times.push_back(tk);
        out.res.states.push_back({pack1(x), pack1(xi)});
        if (with_monodromy) {
            Eigen::MatrixXd m(2, 2);
            m << mxx, mxxi, mxix, mxixi;
            out.res.monodromies.push_back(std::move(m));
        }
    };
    record(0.0);
    for (long k = 1; k <= nsteps; ++k) {
        double g = pot.gradient1(x);
        if (with_monodromy) {
            const double hx = pot.hessian1(x);
            mxix -= 0.5 * h * hx * mxx;
            mxixi -= 0.5 * h * hx * mxxi;
        }
        xi -= 0.5 * h * g;
        x += 2.0 * h * xi;
        if (with_monodromy) {
            mxx += 2.0 * h * mxix;
            mxxi += 2.0 * h * mxixi;
            const double hx = pot.hessian1(x);
            mxix -= 0.5 * h * hx * mxx;
            mxixi -= 0.5 * h * hx * mxxi;
        }
        g = pot.gradient1(x);
        xi -= 0.5 * h * g;

        out.max_drift = std::max(out.max_drift, std::abs(xi * xi + pot.value1(x) - e0));
        const bool exited = std::abs(x) > box;
        if (k % stride == 0 || k == nsteps || exited) record(k * h);
        if (exited) {
            out.res.truncated = true;
            break;
        }
    }
    return out;
}

VerletOut run_verlet_nd(const Potential& pot, const PhasePoint& z0, double t_end,
                        bool with_monodromy, double step, int max_samples) {
    VerletOut out;
    const int n = pot.dim();
    const double box = pot.box_half_width();
    const double e0 = z0.xi.squaredNorm() + pot.value(z0.x);
    const long nsteps = t_end == 0.0 ? 0 : static_cast<long>(std::ceil(std::abs(t_end) / step));
    const double h = nsteps == 0 ? 0.0 : t_end / nsteps;
    const long stride = std::max<long>(1, nsteps / (max_samples - 1));
    out.res.dt = h;

    Eigen::VectorXd x = z0.x, xi = z0.xi;
    Eigen::MatrixXd mx = Eigen::MatrixXd::Zero(n, 2 * n);
    Eigen::MatrixXd mxi = Eigen::MatrixXd::Zero(n, 2 * n);
    mx.leftCols(n).setIdentity();
    mxi.rightCols(n).setIdentity();
    auto record = [&](double tk) {
        out.res.times.push_back(tk);
        out.res.states.push_back({x, xi});
        if (with_monodromy) {
            Eigen::MatrixXd m(2 * n, 2 * n);
            m.topRows(n) = mx;
            m.bottomRows(n) = mxi;
            out.res.monodromies.push_back(std::move(m));
        }
    };
    record(0.0);
    for (long k = 1; k <= nsteps; ++k) {
        if (with_monodromy) {
            const Eigen::MatrixXd hx = pot.hessian(x);
            mxi.noalias() -= (0.5 * h) * (hx * mx);
        }
        xi.noalias() -= (0.5 * h) * pot.gradient(x);
        x.noalias() += (2.0 * h) * xi;
        if (with_monodromy) {
            mx.noalias() += (2.0 * h) * mxi;
            const Eigen::MatrixXd hx = pot.hessian(x);
            mxi.noalias() -= (0.5 * h) * (hx * mx);
        }
        xi.noalias() -= (0.5 * h) * pot.gradient(x);

        out.max_drift = std::max(out.max_drift,
                                 std::abs(xi.squaredNorm() + pot.value(x) - e0));
        const bool exited = x.lpNorm<Eigen::Infinity>() > box;
        if (k % stride == 0 || k == nsteps || exited) record(k * h);
        if (exited) {
            out.res.truncated = true;
            break;
        }
    }
    return out;
}

/// Bisection for the xi = 0 crossing inside one step: returns tau in
/// [0, step] such that a single Verlet substep of size tau from (x0, xi0)
/// lands on the section. Assumes xi0 < 0 and xi(step) >= 0.
double refine_crossing_1d(const Potential& pot, double x0, double xi0, double step) {
    auto xi_after = [&](double tau) {
        const double xih = xi0 - 0.5 * tau * pot.gradient1(x0);
        const double x1 = x0 + 2.0 * tau * xih;
        return xih - 0.5 * tau * pot.gradient1(x1);
    };
    double lo = 0.0, hi = step;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (xi_after(mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

Eigen::VectorXd hamiltonian_field(const Potential& pot, const PhasePoint& z) {
    check_phase_dims(pot, z, "hamiltonian_field");
    const int n = pot.dim();
    Eigen::VectorXd out(2 * n);
    out.head(n) = 2.0 * z.xi;
    out.tail(n) = -pot.gradient(z.x);
    return out;
}

FlowResult integrate_flow(const Potential& pot, const PhasePoint& z0, double t_end,
                          bool with_monodromy, double dt, int max_samples) {
    check_phase_dims(pot, z0, "integrate_flow");
    if (!std::isfinite(t_end)) throw ConfigError("integrate_flow: non-finite end time");
    if (max_samples < 2) throw ConfigError("integrate_flow: need room for at least two samples");
    const int n = pot.dim();
    const double box = pot.box_half_width();
    for (int d = 0; d < n; ++d)
        if (std::abs(z0.x[d]) > box)
            throw ConfigError("integrate_flow: initial point lies outside the box");

    const double e0 = z0.xi.squaredNorm() + pot.value(z0.x);
    const double drift_budget = 1e-8 * (1.0 + std::abs(e0));

    // The fastest local frequency is sqrt(2a) with a bounding the Hessian
    // norm over the accessible region; the default step keeps the Verlet
    // energy wobble ~(w*dt)^2/8 well below the drift budget.
    const CurvatureScan scan = scan_curvature(pot, e0 + 1e-3 * (1.0 + std::abs(e0)));
    const double a = std::max({2.0, scan.sup_norm, hess_spectral_norm(pot, z0.x)});
    const double period_scale = kTwoPi / a;
    if (dt == 0.0) {
        dt = 1e-4 / std::sqrt(a);
    } else {
        if (!(dt > 0.0) || !std::isfinite(dt))
            throw ConfigError("integrate_flow: step must be positive");
        if (dt > 1e-3 * period_scale)
            throw ConfigError(fmt::format(
                "integrate_flow: step {:g} exceeds one thousandth of the local "
                "period scale {:g}",
                dt, period_scale));
    }
    dt = std::min(dt, 1e-3 * period_scale);

    // Retry with a halved step if the drift budget is missed, so every
    // returned FlowResult genuinely satisfies the energy invariant.
    for (int attempt = 0; attempt < 7; ++attempt) {
        VerletOut vo = n == 1 ? run_verlet_1d(pot, z0.x[0], z0.xi[0], t_end,
                                              with_monodromy, dt, max_samples)
                              : run_verlet_nd(pot, z0, t_end, with_monodromy, dt,
                                              max_samples);
        if (vo.max_drift <= drift_budget) return std::move(vo.res);
        dt *= 0.5;
    }
    throw SolverError("integrate_flow: energy drift stayed above tolerance after step refinement");
}

PeriodBound period_lower_bound(const Potential& pot, double e_lo, double e_hi) {
    if (!std::isfinite(e_lo) || !std::isfinite(e_hi) || e_lo > e_hi)
        throw ConfigError("period_lower_bound: invalid energy window");
    // Only the window top matters for the position projection of the
    // accessible region; e_lo is kept for interface symmetry.
    const CurvatureScan scan = scan_curvature(pot, e_hi);
    if (scan.touches_boundary)
        throw ConfigError(
            "period_lower_bound: the accessible region reaches the box "
            "boundary, so the sublevel set is not confined; enlarge the box");
    PeriodBound out;
    out.lipschitz = std::max(2.0, scan.sup_norm);
    out.value = kTwoPi / out.lipschitz;
    out.grid_spacing = scan.spacing;
    return out;
}

std::optional<double> minimal_period_search(const Potential& pot, double E) {
    if (pot.dim() != 1)
        throw ConfigError("minimal_period_search: closed-orbit search supports one dimension only");
    if (!std::isfinite(E)) throw ConfigError("minimal_period_search: non-finite energy");
    const double box = pot.box_half_width();
    if (pot.value1(-box) <= E || pot.value1(box) <= E)
        throw ConfigError("minimal_period_search: the energy surface is not confined inside the box");

    const int pts = 16001;
    const std::vector<double> axis = linspace(-box, box, pts);
    std::vector<double> v(pts);
    double vmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < pts; ++i) {
        v[i] = pot.value1(axis[i]);
        vmin = std::min(vmin, v[i]);
    }
    if (E <= vmin) return std::nullopt;  // empty surface (or a bare equilibrium)

    // One seed per connected component of {V < E}, placed at the deepest
    // grid point so the initial momentum is as large as possible.
    std::vector<double> seeds;
    int i = 0;
    while (i < pts) {
        if (v[i] < E) {
            int arg = i;
            int j = i;
            while (j < pts && v[j] < E) {
                if (v[j] < v[arg]) arg = j;
                ++j;
            }
            seeds.push_back(axis[arg]);
            i = j;
        } else {
            ++i;
        }
    }
    if (seeds.empty()) return std::nullopt;

    // No closed orbit can be shorter than the curvature bound, which sets
    // both the step and the time budget. Orbits that fail to return within
    // the budget (asymptotic to an equilibrium) contribute nothing.
    const CurvatureScan scan = scan_curvature(pot, E);
    const double a = std::max(2.0, scan.sup_norm);
    const double t_bound = kTwoPi / a;
    const double step = t_bound / 20000.0;
    const long nmax = static_cast<long>(std::ceil(200.0 * t_bound / step));

    double best = std::numeric_limits<double>::infinity();
    for (double s : seeds) {
        double x = s;
        double xi = std::sqrt(std::max(0.0, E - pot.value1(s)));
        if (xi == 0.0) continue;  // seed sits on an equilibrium
        double t1 = -1.0, t2 = -1.0;
        for (long k = 1; k <= nmax; ++k) {
            const double px = x, pxi = xi;
            xi -= 0.5 * step * pot.gradient1(x);
            x += 2.0 * step * xi;
            xi -= 0.5 * step * pot.gradient1(x);
            if (std::abs(x) > box) break;
            if (pxi < 0.0 && xi >= 0.0) {
                const double tc =
                    (k - 1) * step + refine_crossing_1d(pot, px, pxi, step);
                if (t1 < 0.0) {
                    t1 = tc;
                } else {
                    t2 = tc;
                    break;
                }
            }
        }
        if (t2 > 0.0) best = std::min(best, t2 - t1);
    }
    if (!std::isfinite(best)) return std::nullopt;
    return best;
}

double dgu_density(const Potential& pot, const PhasePoint& z0, double t) {
    check_phase_dims(pot, z0, "dgu_density");
    if (!std::isfinite(t)) throw ConfigError("dgu_density: non-finite time");
    const int n = pot.dim();
    if (pot.gradient(z0.x).lpNorm<Eigen::Infinity>() > 1e-8 ||
        z0.xi.lpNorm<Eigen::Infinity>() > 1e-12)
        throw ConfigError("dgu_density: the density is defined at equilibria (grad V = 0, xi = 0)");

    Eigen::MatrixXd hess = pot.hessian(z0.x);
    hess = 0.5 * (hess + hess.transpose());

    // At an equilibrium the variational system has constant coefficients;
    // one Richardson level on the Verlet monodromy cancels the step^2 error.
    auto propagate = [&](long steps) {
        const double h = t / static_cast<double>(steps);
        Eigen::MatrixXd mx = Eigen::MatrixXd::Zero(n, 2 * n);
        Eigen::MatrixXd mxi = Eigen::MatrixXd::Zero(n, 2 * n);
        mx.leftCols(n).setIdentity();
        mxi.rightCols(n).setIdentity();
        for (long k = 0; k < steps; ++k) {
            mxi.noalias() -= (0.5 * h) * (hess * mx);
            mx.noalias() += (2.0 * h) * mxi;
            mxi.noalias() -= (0.5 * h) * (hess * mx);
        }
        Eigen::MatrixXd m(2 * n, 2 * n);
        m.topRows(n) = mx;
        m.bottomRows(n) = mxi;
        return m;
    };
    const long n1 = std::max<long>(16, static_cast<long>(std::ceil(std::abs(t) / 1e-3)));
    const Eigen::MatrixXd m = (4.0 * propagate(2 * n1) - propagate(n1)) / 3.0;
    const double det = (m - Eigen::MatrixXd::Identity(2 * n, 2 * n)).determinant();
    if (std::abs(det) < 1e-12)
        throw SolverError(fmt::format(
            "dgu_density: singular time t={:g}, the linearized return map is degenerate", t));
    return 1.0 / std::sqrt(std::abs(det));
}

double closed_form_density(const std::vector<AlphaFactor>& alphas, double t) {
    if (alphas.empty()) throw ConfigError("closed_form_density: no factors given");
    if (!std::isfinite(t)) throw ConfigError("closed_form_density: non-finite time");
    double prod = 1.0;
    for (const AlphaFactor& f : alphas) {
        if (!(f.alpha > 0.0) || !std::isfinite(f.alpha))
            throw ConfigError("closed_form_density: rates must be positive and finite");
        const double u = f.elliptic ? std::sin(f.alpha * t) : std::sinh(f.alpha * t);
        if (std::abs(u) < 1e-12)
            throw SolverError(fmt::format(
                "closed_form_density: factor with rate {:g} vanishes at t={:g}", f.alpha, t));
        prod *= std::abs(u);
    }
    return 1.0 / prod;
}

std::vector<AlphaFactor> dgu_factors_from_hessian(const Eigen::VectorXd& mu) {
    if (mu.size() == 0) throw ConfigError("dgu_factors_from_hessian: empty spectrum");
    std::vector<AlphaFactor> out;
    out.reserve(static_cast<std::size_t>(mu.size()));
    for (int i = 0; i < mu.size(); ++i) {
        if (std::abs(mu[i]) < 1e-12)
            throw ConfigError(
                "dgu_factors_from_hessian: a degenerate direction has no quadratic-model density");
        out.push_back({std::sqrt(std::abs(mu[i]) / 2.0), mu[i] > 0.0});
    }
    return out;
}

double dgu_prefactor(int n) {
    if (n < 1) throw ConfigError("dgu_prefactor: dimension must be positive");
    return std::ldexp(1.0, -n);
}

MehlerKernel mehler_kernel(const std::vector<double>& w, double t,
                           const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const int n = static_cast<int>(w.size());
    if (n == 0 || x.size() != n || y.size() != n)
        throw ConfigError("mehler_kernel: frequency and coordinate dimensions disagree");
    if (!std::isfinite(t)) throw ConfigError("mehler_kernel: non-finite time");
    MehlerKernel out;
    out.amplitude = Complex(1.0, 0.0);
    for (int k = 0; k < n; ++k) {
        if (!(w[k] > 0.0) || !std::isfinite(w[k]))
            throw ConfigError("mehler_kernel: frequencies must be positive and finite");
        const double s = std::sin(w[k] * t);
        if (std::abs(s) < 1e-12)
            throw SolverError(fmt::format(
                "mehler_kernel: singular time t={:g} for frequency {:g}", t, w[k]));
        out.amplitude *= std::sqrt(w[k] / (Complex(0.0, kTwoPi) * s));
        const double c = std::cos(w[k] * t);
        out.action += w[k] / s * (0.5 * c * (x[k] * x[k] + y[k] * y[k]) - x[k] * y[k]);
    }
    return out;
}

}  // namespace specprobe
