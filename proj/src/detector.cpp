#include "specprobe/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "specprobe/classical.hpp"

namespace specprobe {

namespace {



// Reflection-pair decision margins, frozen from the built-in potentials:
// the minimum side clears log(50) and better, the double-well barrier
// stays inside log(2), so the gap below is wide on both sides.
constexpr double kMinLogRatio = 1.3862943611198906;   // log(4)
constexpr double kMaxLogRatio = 0.9162907318741551;   // log(2.5)

// Growth-probe floor for the log(1/h) slope; the barrier signal sits an
// order of magnitude above it, a flat background an order below.
constexpr double kGrowthFloor = 0.015;

// Log-residual ceiling for the curvature fit.
constexpr double kHessianRmsGate = 0.05;

std::vector<double> geomspace(double first, double last, int count) {
    std::vector<double> out(static_cast<size_t>(count));
    const double ratio = std::pow(last / first, 1.0 / (count - 1));
    double v = first;
    for (int i = 0; i < count; ++i, v *= ratio) out[static_cast<size_t>(i)] = v;
    out.back() = last;
    return out;
}

struct CovLine {
    double b0 = 0.0;       // intercept
    double b1 = 0.0;       // slope
    double var_b0 = 0.0;
    double var_b1 = 0.0;
    double cov = 0.0;
    double rms = 0.0;      // sqrt(SSR / n)
    double mean_x = 0.0;
};

// Ordinary least squares y = b0 + b1 x with the covariance scaled by
// SSR / (n - 2). Centered normal equations; n >= 3 enforced by callers.
CovLine cov_line(const std::vector<double>& x, const std::vector<double>& y) {
    const size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0) throw ConfigError("line fit needs distinct abscissae");
    CovLine f;
    f.b1 = sxy / sxx;
    f.b0 = my - f.b1 * mx;
    f.mean_x = mx;
    double ssr = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double r = y[i] - f.b0 - f.b1 * x[i];
        ssr += r * r;
    }
    f.rms = std::sqrt(ssr / static_cast<double>(n));
    const double dof = static_cast<double>(n) - 2.0;
    const double s2 = dof > 0.0 ? ssr / dof : 0.0;
    f.var_b1 = s2 / sxx;
    f.var_b0 = s2 * (1.0 / static_cast<double>(n) + mx * mx / sxx);
    f.cov = -s2 * mx / sxx;
    return f;
}

std::vector<double> ladder_or(const DetectorParams& p, double first, double last,
                              int count) {
    return p.h_list.empty() ? geomspace(first, last, count) : p.h_list;
}

SweepParams sweep_params(double e_c, double halfwidth, const DetectorParams& p) {
    SweepParams sp;
    sp.e1 = e_c - halfwidth;
    sp.e2 = e_c + halfwidth;
    sp.eps = p.eps;
    sp.jobs = p.jobs;
    return sp;
}

// Shortest closed-orbit period found on an energy grid across the band,
// skipping energies within skip_radius of the critical level where the
// surface degenerates. Empty when no closed orbit was found anywhere.
std::optional<double> period_floor(const Potential& pot, double e_lo, double e_hi,
                                   double skip_center, double skip_radius) {
    std::optional<double> floor;
    const int grid = 7;
    for (int i = 0; i < grid; ++i) {
        const double e = e_lo + (e_hi - e_lo) * (i + 0.5) / grid;
        if (std::abs(e - skip_center) < skip_radius) continue;
        if (auto t = minimal_period_search(pot, e)) {
            if (!floor || *t < *floor) floor = *t;
        }
    }
    return floor;
}

// Clips a requested fhat half-width so the kernel support stays clear of
// every classical period in the band (support length < period floor).
double guarded_halfwidth(const Potential& pot, double e_c, double band,
                         double requested) {
    const auto floor = period_floor(pot, e_c - band, e_c + band, e_c, 0.02 * band);
    double w = requested;
    if (floor) w = std::min(w, 0.45 * *floor);
    if (w < 0.02) {
        throw ConfigError(
            fmt::format("probe kernel width collapsed to {:.3g}: classical periods "
                        "in the band are too short for a clean probe",
                        w));
    }
    return w;
}

struct CleanRows {
    std::vector<double> log_h;
    std::vector<double> log_mag;
    int clean = 0;  // rows without solver errors
};

CleanRows usable_rows(const SweepResult& sweep) {
    CleanRows out;
    for (const auto& row : sweep.rows) {
        if (!row.error.empty()) continue;
        ++out.clean;
        const double mag = std::abs(row.value);
        if (row.flagged || mag <= 0.0) continue;
        out.log_h.push_back(std::log(row.h));
        out.log_mag.push_back(std::log(mag));
    }
    return out;
}

}  // namespace

double FitResult::alpha_sigma() const { return std::sqrt(std::max(0.0, var_alpha)); }

double FitResult::amplitude_at_center() const {
    return std::exp(log_c + alpha * center_log_h);
}

FitResult fit_power_log(const SweepResult& sweep) {
    if (sweep.rows.size() < 6) {
        throw ConfigError(fmt::format("power-log fit needs >= 6 h points, got {}",
                                      sweep.rows.size()));
    }
    double h_min = std::numeric_limits<double>::infinity();
    double h_max = 0.0;
    for (const auto& row : sweep.rows) {
        if (!(row.h > 0.0) || row.h >= 1.0) {
            throw ConfigError("power-log fit needs 0 < h < 1 on every row");
        }
        h_min = std::min(h_min, row.h);
        h_max = std::max(h_max, row.h);
    }
    if (std::log10(h_max / h_min) < 0.5) {
        throw ConfigError(fmt::format(
            "power-log fit needs at least half a decade of h, got {:.3g}..{:.3g}",
            h_min, h_max));
    }

    const CleanRows rows = usable_rows(sweep);
    FitResult out;
    if (rows.log_h.empty()) {
        // Either every solve failed or every magnitude sat below its own
        // floor; there is nothing honest to fit.
        out.numerically_zero = rows.clean > 0;
        if (rows.clean == 0) throw SolverError("every sweep row failed to solve");
        return out;
    }
    if (rows.log_h.size() < 4) {
        throw SolverError(fmt::format(
            "only {} of {} sweep rows rose above their noise floor; the fit "
            "would be dominated by cuts",
            rows.log_h.size(), sweep.rows.size()));
    }

    const CovLine plain = cov_line(rows.log_h, rows.log_mag);
    // The m = 1 branch fixes the log log(1/h) coefficient at one and
    // refits the same line on the shifted data.
    std::vector<double> shifted = rows.log_mag;
    for (size_t i = 0; i < shifted.size(); ++i) {
        shifted[i] -= std::log(std::log(1.0 / std::exp(rows.log_h[i])));
    }
    const CovLine logged = cov_line(rows.log_h, shifted);

    const bool pick_log = logged.rms < 0.95 * plain.rms;
    const CovLine& best = pick_log ? logged : plain;
    out.m = pick_log ? 1 : 0;
    out.alpha = best.b1;
    out.log_c = best.b0;
    out.amplitude = std::exp(best.b0);
    out.rms = best.rms;
    out.var_log_c = best.var_b0;
    out.var_alpha = best.var_b1;
    out.cov_log_c_alpha = best.cov;
    out.center_log_h = best.mean_x;
    out.used = static_cast<int>(rows.log_h.size());
    return out;
}

LevelClass classify_level(PotentialPtr pot, double E, const TestFunction& tf,
                          const DetectorParams& params) {
    if (!pot) throw ConfigError("classify_level needs a potential");
    const bool weak = params.weak_mode || !weyl_kill_check(tf);
    const double band = params.band_halfwidth > 0.0 ? params.band_halfwidth : 0.8;
    const auto h_list =
        params.h_list.empty() ? default_h_list() : params.h_list;

    const SweepResult sweep =
        h_sweep(pot, E, tf, h_list, sweep_params(E, band, params));

    LevelClass out;
    try {
        out.fit = fit_power_log(sweep);
    } catch (const SolverError& err) {
        out.verdict = LevelVerdict::inconclusive;
        out.note = fmt::format("sweep unusable: {}", err.what());
        return out;
    }

    if (out.fit.numerically_zero) {
        out.verdict = LevelVerdict::regular;
        out.note = "response below the truncation floor at every h";
        return out;
    }

    const double slope = out.fit.alpha;
    const bool clean_fit = out.fit.rms <= params.rms_gate &&
                           out.fit.alpha_sigma() <= params.alpha_sigma_gate;
    if (!weak) {
        if (slope >= 3.0) {
            out.verdict = LevelVerdict::regular;
            out.note = fmt::format("rapid decay, fitted slope {:.2f} >= 3", slope);
        } else if (clean_fit) {
            out.verdict = LevelVerdict::critical;
            out.note = fmt::format("slow decay, fitted order h^{:.3f}", slope);
        } else {
            out.verdict = LevelVerdict::inconclusive;
            out.note = fmt::format(
                "fit too noisy for a verdict (rms {:.3f}, sigma(alpha) {:.3f})",
                out.fit.rms, out.fit.alpha_sigma());
        }
        return out;
    }

    // Bounded-growth criterion: the kernel keeps the smooth background,
    // so only growth in h is evidence of a singular level.
    if (out.fit.m == 1 && clean_fit) {
        out.verdict = LevelVerdict::critical;
        out.note = "log(1/h) growth on a bounded background";
    } else if (slope >= -0.05 && out.fit.m == 0) {
        out.verdict = LevelVerdict::regular;
        out.note = fmt::format("bounded response, fitted slope {:.3f}", slope);
    } else if (clean_fit) {
        out.verdict = LevelVerdict::critical;
        out.note = fmt::format("growing response, fitted order h^{:.3f}", slope);
    } else {
        out.verdict = LevelVerdict::inconclusive;
        out.note = fmt::format(
            "fit too noisy for a verdict (rms {:.3f}, sigma(alpha) {:.3f})",
            out.fit.rms, out.fit.alpha_sigma());
    }
    return out;
}

DegreeEstimate infer_degree(double alpha, int n, double alpha_sigma) {
    if (n < 1) throw ConfigError("degree inversion needs n >= 1");
    if (!(alpha_sigma >= 0.0)) throw ConfigError("alpha_sigma must be >= 0");
    const double slack = std::max(3.0 * alpha_sigma, 0.1);
    if (alpha > slack || alpha <= -0.5 * n) {
        throw ConfigError(fmt::format(
            "exponent {:.4f} is outside the admissible range (-{:.1f}, 0] for n={}",
            alpha, 0.5 * n, n));
    }
    DegreeEstimate out;
    const double a = std::min(alpha, 0.0);
    out.k_real = n / (n + 2.0 * a);
    out.k = std::max(1, static_cast<int>(std::lround(out.k_real)));
    // dk/dalpha = -2 k^2 / n propagates the fit uncertainty.
    out.k_sigma = 2.0 * out.k_real * out.k_real / n * alpha_sigma;
    const double err = std::abs(out.k_real - out.k);
    // Finite-h sweeps bias the fitted exponent by ~1%, which the statistical
    // sigma does not cover; a 0.05 absolute floor keeps that bias from
    // rejecting a correct rounding (adjacent k are >= 0.5 apart in k_real).
    out.accepted = err <= std::max(3.0 * out.k_sigma, 0.05);
    return out;
}

LogProbe log_probe(PotentialPtr pot, double e_c, const DetectorParams& params) {
    if (!pot) throw ConfigError("log_probe needs a potential");
    const double band = params.band_halfwidth > 0.0 ? params.band_halfwidth : 0.45;
    const double w =
        guarded_halfwidth(*pot, e_c, band, params.probe_halfwidth);
    const TestFunction tf = make_test_function(0, -w, w, SupportMode::symmetric);
    const auto h_list = ladder_or(params, 0.02, 0.002, 10);

    const SweepResult sweep =
        h_sweep(pot, e_c, tf, h_list, sweep_params(e_c, band, params));
    const CleanRows rows = usable_rows(sweep);
    if (rows.log_h.size() < 5) {
        throw SolverError(fmt::format(
            "growth probe has only {} usable rows; widen the band or shrink h",
            rows.log_h.size()));
    }

    // |Y| = offset + slope * log(1/h), fitted linearly (not on the log
    // scale: the offset may dominate and can carry either sign).
    std::vector<double> x(rows.log_h.size()), y(rows.log_h.size());
    for (size_t i = 0; i < rows.log_h.size(); ++i) {
        x[i] = -rows.log_h[i];  // log(1/h)
        y[i] = std::exp(rows.log_mag[i]);
    }
    const CovLine line = cov_line(x, y);

    LogProbe out;
    out.slope = line.b1;
    out.offset = line.b0;
    out.slope_sigma = std::sqrt(std::max(0.0, line.var_b1));
    out.rms = line.rms;
    out.used = static_cast<int>(x.size());
    out.halfwidth = w;
    out.growth =
        line.b1 > kGrowthFloor && line.b1 >= 3.0 * out.slope_sigma;
    return out;
}

TypeResult infer_type(PotentialPtr pot, double e_c, const FitResult& fit,
                      const DetectorParams& params) {
    if (!pot) throw ConfigError("infer_type needs a potential");
    TypeResult out;
    if (fit.m == 1) {
        out.verdict = ExtremumVerdict::maximum;
        out.note = "log(1/h) factor in the sweep; only a maximum produces it";
        return out;
    }

    const auto h_list = ladder_or(params, 0.02, 0.004, 7);
    const double h_top = *std::max_element(h_list.begin(), h_list.end());
    const double a = params.probe_offset;
    const double band = params.band_halfwidth > 0.0
                            ? params.band_halfwidth
                            : (a + 30.0) * h_top;
    const double w = guarded_halfwidth(*pot, e_c, band, params.probe_halfwidth);
    const TestFunction bump = make_test_function(0, -w, w, SupportMode::symmetric);
    // phi(s - a) listens just above E_c, its reflection phi(-s - a) just
    // below; shifted(ds) maps s to phi(s + ds).
    const TestFunction above = bump.shifted(-a);
    const TestFunction below = bump.shifted(+a);

    const SweepParams sp = sweep_params(e_c, band, params);
    const SweepResult up = h_sweep(pot, e_c, above, h_list, sp);
    const SweepResult down = h_sweep(pot, e_c, below, h_list, sp);

    std::vector<double> log_r;
    for (size_t i = 0; i < up.rows.size(); ++i) {
        const auto& ru = up.rows[i];
        const auto& rd = down.rows[i];
        if (!ru.error.empty() || !rd.error.empty()) continue;
        if (ru.flagged) continue;  // no signal above: nothing to compare
        const double mag_up = std::abs(ru.value);
        const double floor_down =
            std::max({std::abs(rd.value), rd.tail_bound, rd.noise_bound, 1e-300});
        log_r.push_back(std::log(mag_up / floor_down));
    }
    if (log_r.size() < 3) {
        out.note = fmt::format(
            "only {} h points carried signal above the level; probe inconclusive",
            log_r.size());
        return out;
    }

    double mean = 0.0;
    for (double v : log_r) mean += v;
    mean /= static_cast<double>(log_r.size());
    double var = 0.0;
    for (double v : log_r) var += (v - mean) * (v - mean);
    var /= static_cast<double>(log_r.size());
    const double sem = std::sqrt(var / static_cast<double>(log_r.size()));

    out.log_ratio = mean;
    out.scatter = sem;
    const double min_gate = std::max(kMinLogRatio, 3.0 * sem);
    if (mean >= min_gate) {
        out.verdict = ExtremumVerdict::minimum;
        out.note = fmt::format(
            "spectrum only above the level: log ratio {:.2f} over gate {:.2f}",
            mean, min_gate);
    } else if (std::abs(mean) <= kMaxLogRatio && 3.0 * sem <= kMaxLogRatio) {
        out.verdict = ExtremumVerdict::maximum;
        out.note = fmt::format(
            "two-sided response: log ratio {:.2f} within +-{:.2f}", mean,
            kMaxLogRatio);
    } else {
        out.note = fmt::format(
            "log ratio {:.2f} +- {:.2f} sits between the decision gates", mean,
            sem);
    }
    return out;
}

double recover_spherical_mean_ratio(PotentialPtr pot_a, double ec_a,
                                    PotentialPtr pot_b, double ec_b,
                                    const TestFunction& tf,
                                    const DetectorParams& params) {
    if (!pot_a || !pot_b) throw ConfigError("amplitude ratio needs two potentials");
    const double band = params.band_halfwidth > 0.0 ? params.band_halfwidth : 0.8;
    const auto h_list = params.h_list.empty() ? default_h_list() : params.h_list;

    const SweepResult sa =
        h_sweep(pot_a, ec_a, tf, h_list, sweep_params(ec_a, band, params));
    const SweepResult sb =
        h_sweep(pot_b, ec_b, tf, h_list, sweep_params(ec_b, band, params));
    const FitResult fa = fit_power_log(sa);
    const FitResult fb = fit_power_log(sb);
    if (fa.numerically_zero || fb.numerically_zero) {
        throw SolverError("amplitude ratio needs signal at both levels");
    }
    if (fa.m != fb.m) {
        throw ConfigError(fmt::format(
            "mismatched singularity classes: log exponents {} vs {}", fa.m, fb.m));
    }
    const int n = pot_a->dim();
    const DegreeEstimate ka = infer_degree(fa.alpha, n, fa.alpha_sigma());
    const DegreeEstimate kb = infer_degree(fb.alpha, pot_b->dim(), fb.alpha_sigma());
    if (ka.k != kb.k) {
        throw ConfigError(fmt::format(
            "mismatched singularity classes: degrees {} vs {} from exponents "
            "{:.3f} vs {:.3f}",
            ka.k, kb.k, fa.alpha, fb.alpha));
    }

    // Compare the amplitudes at a common central h inside both fit
    // ranges; reading C at h = 1 would leave the exponent uncertainty
    // amplified by the whole extrapolation distance.
    const double center = 0.5 * (fa.center_log_h + fb.center_log_h);
    const double la = fa.log_c + fa.alpha * center;
    const double lb = fb.log_c + fb.alpha * center;
    return std::exp(la - lb);
}

namespace {

// Residual and Jacobian of the log product model for one signature r:
//   f(t) = -sum_{j<r} log|sinh(a_j t)| - sum_{j>=r} log|sin(a_j t)|.
struct ProductModel {
    int r = 0;
    int n = 0;

    double eval(const std::vector<double>& a, double t) const {
        double f = 0.0;
        for (int j = 0; j < n; ++j) {
            const double arg = a[static_cast<size_t>(j)] * t;
            const double factor =
                j < r ? std::abs(std::sinh(arg)) : std::abs(std::sin(arg));
            f -= std::log(std::max(factor, 1e-300));
        }
        return f;
    }

    // d residual / d a_j for residual = y - f, capped near the sin zeros so a
    // single sample sitting on a pole cannot dominate the normal equations.
    double deriv(const std::vector<double>& a, double t, int j) const {
        const double arg = a[static_cast<size_t>(j)] * t;
        if (j < r) return t / std::tanh(arg);
        const double s = std::sin(arg);
        const double cot = std::cos(arg) / (s >= 0 ? std::max(s, 1e-8)
                                                   : std::min(s, -1e-8));
        return t * std::clamp(cot, -1e4, 1e4);
    }
};

struct LmOutcome {
    std::vector<double> alphas;
    double rms = std::numeric_limits<double>::infinity();
};

// The elliptic coordinates see a rugged objective: log|sin(a t)| has poles
// between basins, so gradient steps cannot cross from one basin to another
// and a coarse joint multi-start misses narrow basins.  The model is a sum
// of one-coordinate terms in log space, so cyclic per-coordinate grid scans
// locate the right basin deterministically; the quadratic polish runs after.
std::vector<double> coordinate_scan(const ProductModel& model,
                                    const std::vector<double>& t,
                                    const std::vector<double>& y) {
    const int n = model.n;
    const size_t m = t.size();
    std::vector<double> grid;
    for (double g = 0.05; g <= 40.0; g *= 1.02) grid.push_back(g);

    auto term = [&](int j, double a_j, double tt) {
        const double arg = a_j * tt;
        const double factor =
            j < model.r ? std::abs(std::sinh(arg)) : std::abs(std::sin(arg));
        return -std::log(std::max(factor, 1e-300));
    };

    std::vector<double> a(static_cast<size_t>(n), 1.0);
    for (int sweep = 0; sweep < 8; ++sweep) {
        bool changed = false;
        for (int j = 0; j < n; ++j) {
            std::vector<double> partial(m);
            for (size_t i = 0; i < m; ++i) {
                double rest = 0.0;
                for (int k = 0; k < n; ++k) {
                    if (k != j) rest += term(k, a[static_cast<size_t>(k)], t[i]);
                }
                partial[i] = y[i] - rest;
            }
            double best_ssr = std::numeric_limits<double>::infinity();
            double best_a = a[static_cast<size_t>(j)];
            for (double g : grid) {
                double ssr = 0.0;
                for (size_t i = 0; i < m; ++i) {
                    const double e = partial[i] - term(j, g, t[i]);
                    ssr += e * e;
                }
                if (ssr < best_ssr) {
                    best_ssr = ssr;
                    best_a = g;
                }
            }
            if (best_a != a[static_cast<size_t>(j)]) {
                a[static_cast<size_t>(j)] = best_a;
                changed = true;
            }
        }
        if (!changed) break;
    }
    return a;
}

LmOutcome levenberg_marquardt(const ProductModel& model,
                              const std::vector<double>& t,
                              const std::vector<double>& y,
                              std::vector<double> a) {
    const int n = model.n;
    const size_t m = t.size();
    auto ssr_of = [&](const std::vector<double>& cur) {
        double ssr = 0.0;
        for (size_t i = 0; i < m; ++i) {
            const double e = y[i] - model.eval(cur, t[i]);
            ssr += e * e;
        }
        return ssr;
    };

    double lambda = 1e-3;
    double ssr = ssr_of(a);
    for (int iter = 0; iter < 80; ++iter) {
        Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd jte = Eigen::VectorXd::Zero(n);
        for (size_t i = 0; i < m; ++i) {
            const double e = y[i] - model.eval(a, t[i]);
            Eigen::VectorXd row(n);
            for (int j = 0; j < n; ++j) row(j) = model.deriv(a, t[i], j);
            jtj += row * row.transpose();
            jte += row * e;
        }
        bool moved = false;
        for (int tries = 0; tries < 8; ++tries) {
            Eigen::MatrixXd damped = jtj;
            for (int j = 0; j < n; ++j) damped(j, j) += lambda * (1.0 + jtj(j, j));
            const Eigen::VectorXd step = damped.ldlt().solve(jte);
            std::vector<double> next = a;
            for (int j = 0; j < n; ++j) {
                next[static_cast<size_t>(j)] = std::clamp(
                    next[static_cast<size_t>(j)] - step(j), 1e-3, 60.0);
            }
            const double next_ssr = ssr_of(next);
            if (next_ssr < ssr) {
                const double gain = ssr - next_ssr;
                a = std::move(next);
                ssr = next_ssr;
                lambda = std::max(lambda / 3.0, 1e-12);
                moved = true;
                if (gain < 1e-16) iter = 80;
                break;
            }
            lambda *= 4.0;
        }
        if (!moved) break;
    }

    LmOutcome out;
    out.alphas = std::move(a);
    out.rms = std::sqrt(ssr_of(out.alphas) / static_cast<double>(m));
    return out;
}

}  // namespace

HessianSpectrum recover_hessian_spectrum(
    const std::vector<std::pair<double, double>>& samples, int n) {
    if (n < 1 || n > 3) throw ConfigError("curvature fit supports n in 1..3");
    const size_t need = static_cast<size_t>(8 * (n + 1));
    if (samples.size() < need) {
        throw ConfigError(fmt::format(
            "curvature fit needs >= {} samples for n={}, got {}", need, n,
            samples.size()));
    }
    std::vector<double> t(samples.size()), y(samples.size());
    for (size_t i = 0; i < samples.size(); ++i) {
        if (!(samples[i].first > 0.0)) {
            throw ConfigError("curvature samples need positive times");
        }
        if (!(samples[i].second > 0.0) || !std::isfinite(samples[i].second)) {
            throw ConfigError("curvature samples need positive finite values");
        }
        t[i] = samples[i].first;
        y[i] = std::log(samples[i].second);
    }

    LmOutcome best;
    int best_r = 0;
    for (int r = 0; r <= n; ++r) {
        ProductModel model{r, n};
        LmOutcome got = levenberg_marquardt(model, t, y, coordinate_scan(model, t, y));
        if (got.rms < best.rms) {
            best = std::move(got);
            best_r = r;
        }
    }

    if (!(best.rms <= kHessianRmsGate)) {
        throw SolverError(fmt::format(
            "no curvature model fits the samples (best log-rms {:.3g} over gate "
            "{:.3g})",
            best.rms, kHessianRmsGate));
    }

    HessianSpectrum out;
    out.signature_r = best_r;
    out.rms = best.rms;
    std::sort(best.alphas.begin(), best.alphas.begin() + best_r);
    std::sort(best.alphas.begin() + best_r, best.alphas.end());
    out.alphas = best.alphas;
    out.mu.resize(out.alphas.size());
    for (size_t j = 0; j < out.alphas.size(); ++j) {
        const double m2 = 2.0 * out.alphas[j] * out.alphas[j];
        out.mu[j] = static_cast<int>(j) < best_r ? -m2 : m2;
    }
    return out;
}

std::vector<DensitySample> density_from_quantum(PotentialPtr pot, double z0,
                                                double e_c,
                                                const std::vector<double>& centers,
                                                const DetectorParams& params) {
    if (!pot) throw ConfigError("density recovery needs a potential");
    if (pot->dim() != 1) throw ConfigError("density recovery is one-dimensional");
    if (centers.empty()) throw ConfigError("density recovery needs bump centers");

    const auto cps = find_critical_points(*pot);
    const CriticalPointInfo* cp = nullptr;
    for (const auto& c : cps) {
        if (std::abs(c.x0(0) - z0) <= 5e-3 &&
            (!cp || std::abs(c.x0(0) - z0) < std::abs(cp->x0(0) - z0))) {
            cp = &c;
        }
    }
    if (!cp) {
        throw ConfigError(
            fmt::format("no critical point found near x = {:.6g}", z0));
    }
    if (std::abs(cp->e_c - e_c) > 1e-3) {
        throw ConfigError(fmt::format(
            "critical value at x = {:.6g} is {:.6g}, not the requested {:.6g}",
            cp->x0(0), cp->e_c, e_c));
    }
    const double mu = cp->hessian(0, 0);
    if (std::abs(mu) < 1e-8) {
        throw ConfigError("density recovery needs a nondegenerate critical point");
    }
    const double alpha0 = std::sqrt(0.5 * std::abs(mu));
    const bool elliptic = mu > 0.0;

    const double band = params.band_halfwidth > 0.0 ? params.band_halfwidth : 1.0;
    const double w = params.density_halfwidth;
    const auto floor = period_floor(*pot, e_c - band, e_c + band, e_c, 0.02 * band);

    for (double ti : centers) {
        if (!(ti - w >= 0.02)) {
            throw ConfigError(fmt::format(
                "bump at t = {:.3f} reaches below t = 0 (half-width {:.2f})", ti,
                w));
        }
        if (elliptic) {
            // sin(alpha0 t) vanishes at multiples of pi / alpha0; the bump
            // support must keep a margin from each zero.
            const double spacing = kPi / alpha0;
            const double nearest =
                std::round(ti / spacing) * spacing;
            if (std::abs(ti - nearest) < w + 0.03 && nearest > 0.0) {
                throw ConfigError(fmt::format(
                    "bump at t = {:.3f} overlaps the singular return time {:.3f}",
                    ti, nearest));
            }
        }
        if (floor && ti + w > 0.95 * *floor) {
            throw ConfigError(fmt::format(
                "bump at t = {:.3f} reaches the shortest classical period {:.3f}",
                ti, *floor));
        }
    }

    const auto h_list = ladder_or(params, 0.008, 0.0025, 8);
    std::vector<DensitySample> out;
    out.reserve(centers.size());
    for (double ti : centers) {
        const TestFunction tf =
            make_test_function(0, ti - w, ti + w, SupportMode::one_sided);
        const SweepResult sweep =
            h_sweep(pot, e_c, tf, h_list, sweep_params(e_c, band, params));
        FitResult fit = fit_power_log(sweep);
        if (fit.numerically_zero) {
            throw SolverError(fmt::format(
                "no response above the noise floor at t = {:.3f}", ti));
        }
        if (std::abs(fit.alpha) > 0.1) {
            throw SolverError(fmt::format(
                "sweep at t = {:.3f} is not flat (fitted order h^{:.3f}); the "
                "density limit does not exist here",
                ti, fit.alpha));
        }
        // The density is the trace constant divided by the kernel's time
        // mass (1/2pi) integral fhat.
        const double mass = std::abs(tf.fhat_integral()) / (2.0 * kPi);
        DensitySample s;
        s.t = ti;
        s.value = fit.amplitude_at_center() / mass;
        s.alpha = fit.alpha;
        out.push_back(s);
    }
    return out;
}

namespace {

// Reference potential with A = 2: x^(2k) for minima, the inverted well
// x^(2k+2) - x^(2k) for maxima (critical value 0 at the origin in both).
PotentialPtr reference_potential(int k, ExtremumVerdict type) {
    if (type == ExtremumVerdict::minimum) return make_pure_power(k);
    std::vector<double> coeffs(static_cast<size_t>(2 * k + 3), 0.0);
    coeffs[static_cast<size_t>(2 * k)] = -1.0;
    coeffs[static_cast<size_t>(2 * k + 2)] = 1.0;
    return make_polynomial(coeffs, 3.0);
}

std::string verdict_name(LevelVerdict v) {
    switch (v) {
        case LevelVerdict::regular: return "regular";
        case LevelVerdict::critical: return "critical";
        default: return "inconclusive";
    }
}

}  // namespace

TestFunction default_classification_kernel(const Potential& pot, double e_c,
                                           double band_halfwidth) {
    const double band = band_halfwidth > 0.0 ? band_halfwidth : 0.8;
    const auto floor = period_floor(pot, e_c - band, e_c + band, e_c, 0.02 * band);
    double supp_hi = 3.0;
    if (floor) supp_hi = std::min(supp_hi, 0.9 * *floor);
    if (supp_hi < 0.1) {
        throw ConfigError(fmt::format(
            "shortest classical period {:.3f} leaves no room for the one-sided "
            "kernel",
            floor ? *floor : 0.0));
    }
    return make_test_function(0, 0.05, supp_hi, SupportMode::one_sided);
}

CriticalReport analyze_critical_level(PotentialPtr pot, double e_c,
                                      const DetectorParams& params) {
    if (!pot) throw ConfigError("analysis needs a potential");
    if (pot->dim() != 1) throw ConfigError("the analysis pipeline is one-dimensional");

    CriticalReport report;
    report.e_c = e_c;

    const TestFunction kernel =
        default_classification_kernel(*pot, e_c, params.band_halfwidth);
    const double supp_hi = kernel.support_hi();
    report.diagnostics.push_back(fmt::format(
        "classification kernel: one-sided support ({:.2f}, {:.2f})", 0.05,
        supp_hi));

    report.classification = classify_level(pot, e_c, kernel, params);
    report.diagnostics.push_back(fmt::format(
        "classification: {} ({})", verdict_name(report.classification.verdict),
        report.classification.note));
    if (report.classification.verdict != LevelVerdict::critical) return report;

    const FitResult& fit = report.classification.fit;
    report.alpha = fit.alpha;
    report.degree = infer_degree(fit.alpha, 1, fit.alpha_sigma());
    report.diagnostics.push_back(fmt::format(
        "degree: k = {} from exponent {:.3f} (k_real {:.3f}, {})",
        report.degree.k, fit.alpha, report.degree.k_real,
        report.degree.accepted ? "accepted" : "rejected"));

    // Count directly the critical points sharing this level; several at
    // once means their contributions aggregate in every amplitude below.
    int sharing = 0;
    for (const auto& c : find_critical_points(*pot)) {
        if (std::abs(c.e_c - e_c) <= 1e-6) ++sharing;
    }
    if (sharing > 1) {
        report.diagnostics.push_back(fmt::format(
            "{} critical points share this level; amplitudes aggregate their "
            "contributions",
            sharing));
    }

    try {
        const LogProbe growth = log_probe(pot, e_c, params);
        report.m = growth.growth ? 1 : 0;
        report.diagnostics.push_back(fmt::format(
            "growth probe: slope {:.4f} +- {:.4f} per log(1/h) -> m = {}",
            growth.slope, growth.slope_sigma, report.m));
    } catch (const std::exception& err) {
        report.diagnostics.push_back(
            fmt::format("growth probe unavailable: {}", err.what()));
    }

    FitResult typed = fit;
    typed.m = std::max(fit.m, report.m);
    const TypeResult type = infer_type(pot, e_c, typed, params);
    report.type = type.verdict;
    report.diagnostics.push_back(fmt::format("type probe: {}", type.note));

    if (report.type != ExtremumVerdict::inconclusive && report.degree.accepted) {
        try {
            PotentialPtr ref = reference_potential(report.degree.k, report.type);
            report.a_ratio = recover_spherical_mean_ratio(pot, e_c, ref, 0.0,
                                                          kernel, params);
            report.a_value = 2.0 * report.a_ratio;  // reference has A = 2
            report.calibration =
                report.type == ExtremumVerdict::minimum
                    ? fmt::format("x^{} reference", 2 * report.degree.k)
                    : fmt::format("x^{} - x^{} reference", 2 * report.degree.k + 2,
                                  2 * report.degree.k);
        } catch (const std::exception& err) {
            report.diagnostics.push_back(
                fmt::format("amplitude calibration failed: {}", err.what()));
        }
    }

    if (report.degree.k == 1 && report.degree.accepted &&
        report.type != ExtremumVerdict::inconclusive &&
        params.hessian_centers > 0) {
        try {
            const auto points = find_critical_points(*pot);
            const CriticalPointInfo* cp = nullptr;
            for (const auto& c : points) {
                if (std::abs(c.e_c - e_c) > 1e-6) continue;
                if (!cp || std::abs(c.e_c - e_c) < std::abs(cp->e_c - e_c)) cp = &c;
            }
            if (!cp) throw ConfigError("no critical point at this level");
            const double mu = cp->hessian(0, 0);
            const double alpha0 = std::sqrt(0.5 * std::abs(mu));
            const bool elliptic = mu > 0.0;
            const double w = params.density_halfwidth;
            double t_cap = 2.6;
            {
                const auto dens_floor =
                    period_floor(*pot, e_c - 1.0, e_c + 1.0, e_c, 0.02);
                if (dens_floor) t_cap = std::min(t_cap, 0.9 * *dens_floor);
            }
            std::vector<double> centers;
            const int want = std::max(params.hessian_centers, 16);
            for (int i = 0; i < 3 * want && static_cast<int>(centers.size()) < want;
                 ++i) {
                const double ti = 0.45 + (t_cap - w - 0.5) * i / (3.0 * want - 1);
                if (!(ti - w >= 0.02) || ti + w > t_cap) continue;
                if (elliptic) {
                    const double spacing = kPi / alpha0;
                    const double nearest = std::round(ti / spacing) * spacing;
                    if (nearest > 0.0 && std::abs(ti - nearest) < w + 0.05) continue;
                }
                centers.push_back(ti);
            }
            if (static_cast<int>(centers.size()) < 16) {
                throw ConfigError(fmt::format(
                    "only {} valid bump centers below the period cap {:.2f}",
                    centers.size(), t_cap));
            }
            const auto samples = density_from_quantum(pot, cp->x0(0), e_c,
                                                      centers, params);
            std::vector<std::pair<double, double>> scaled;
            scaled.reserve(samples.size());
            for (const auto& s : samples) {
                scaled.emplace_back(s.t, 2.0 * s.value);  // 2^n with n = 1
            }
            const HessianSpectrum hess = recover_hessian_spectrum(scaled, 1);
            report.hessian_alphas = hess.alphas;
            report.hessian_mu = hess.mu;
            report.signature_r = hess.signature_r;
            report.diagnostics.push_back(fmt::format(
                "curvature fit: alpha = {:.4f}, signature r = {}, recovered "
                "V'' = {:.4f} vs symbolic {:.4f}",
                hess.alphas[0], hess.signature_r, hess.mu[0], mu));
        } catch (const std::exception& err) {
            report.diagnostics.push_back(
                fmt::format("curvature recovery skipped: {}", err.what()));
        }
    }

    return report;
}

}  // namespace specprobe
