#include "specprobe/specdist.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include <fmt/core.h>

namespace specprobe {

namespace {

void check_grid_sorted(const std::vector<double>& v, const char* what) {
    for (size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]))
            throw ConfigError(fmt::format("{}: entry {} is not finite", what, i));
        if (i > 0 && !(v[i] < v[i - 1]))
            throw ConfigError(fmt::format("{}: must be strictly decreasing", what));
    }
}

std::string describe(const TestFunction& tf) {
    return fmt::format("j0={} support [{:.6g}, {:.6g}] {}", tf.j0(),
                       tf.support_lo(), tf.support_hi(),
                       tf.mode() == SupportMode::symmetric ? "symmetric" : "one-sided");
}

}  // namespace

double phi_lipschitz_bound(const TestFunction& tf) {
    auto f = [&tf](double t) { return std::abs(t) * std::abs(tf.fhat(t)); };
    return integrate_gl(f, tf.support_lo(), tf.support_hi(), 256) / kTwoPi;
}

UpsilonResult upsilon(const Spectrum& spec, double E, const TestFunction& tf) {
    if (!std::isfinite(E)) throw ConfigError("upsilon: E is not finite");
    if (E < spec.window_lo || E > spec.window_hi)
        throw ConfigError(fmt::format(
            "upsilon: E = {:g} outside the spectral window [{:g}, {:g}]", E,
            spec.window_lo, spec.window_hi));
    if (!(spec.h > 0.0)) throw ConfigError("upsilon: spectrum has no positive h");

    const double h = spec.h;
    const double smax = tf.s_max();
    UpsilonResult out;
    double conv_sum = 0.0;
    for (size_t j = 0; j < spec.eigenvalues.size(); ++j) {
        const double s = (spec.eigenvalues[j] - E) / h;
        out.value += tf.phi(s);
        ++out.count;
        // phi() drops arguments beyond its cached extent; charge those
        // terms to the certified pointwise tail bound instead.
        if (std::abs(s) >= 0.999 * smax) out.tail_bound += tf.tail_bound(std::abs(s));
        if (j < spec.convergence.size()) conv_sum += spec.convergence[j];
    }

    // Eigenvalues outside the window were never summed. Estimate their
    // total weight by the empirical level density times the kernel mass
    // beyond each window edge, with a factor-2 safety margin per side.
    const double width = spec.window_hi - spec.window_lo;
    const double rho = width > 0.0 ? static_cast<double>(out.count) / width : 0.0;
    const double s_lo = (E - spec.window_lo) / h;
    const double s_hi = (spec.window_hi - E) / h;
    out.tail_bound += 2.0 * rho * h * (tf.tail_mass(s_lo) + tf.tail_mass(s_hi));

    out.noise_bound = phi_lipschitz_bound(tf) * conv_sum / h;
    return out;
}

SweepResult h_sweep(PotentialPtr pot, double E, const TestFunction& tf,
                    const std::vector<double>& h_list, const SweepParams& params) {
    if (!pot) throw ConfigError("h_sweep: null potential");
    if (pot->dim() != 1) throw ConfigError("h_sweep: spectra require a 1d potential");
    if (h_list.empty()) throw ConfigError("h_sweep: empty h list");
    check_grid_sorted(h_list, "h_sweep: h list");
    if (!(h_list.back() > 0.0)) throw ConfigError("h_sweep: h values must be positive");
    if (!(params.e1 <= E && E <= params.e2))
        throw ConfigError(fmt::format("h_sweep: E = {:g} outside the band [{:g}, {:g}]",
                                      E, params.e1, params.e2));
    const double eps =
        params.eps < 0.0 ? 0.1 * (params.e2 - params.e1) : params.eps;
    if (!(eps > 0.0))
        throw ConfigError("h_sweep: window padding must be positive");

    SweepResult res;
    res.E = E;
    res.window_lo = params.e1 - eps;
    res.window_hi = params.e2 + eps;
    res.tf_note = describe(tf);
    res.rows.resize(h_list.size());

    auto solve_one = [&](size_t i) {
        SweepRow row;
        row.h = h_list[i];
        try {
            DiscretizedOperator op = discretize_auto(pot, h_list[i], res.window_hi);
            Spectrum spec = eigen_window(op, res.window_lo, res.window_hi);
            UpsilonResult u = upsilon(spec, E, tf);
            row.value = u.value;
            row.count = u.count;
            row.tail_bound = u.tail_bound;
            row.noise_bound = u.noise_bound;
            row.flagged = !(std::abs(u.value) >= std::max(u.tail_bound, u.noise_bound));
        } catch (const std::exception& e) {
            row.error = e.what();
            row.flagged = true;
        }
        res.rows[i] = std::move(row);
    };

    const int jobs = std::max(1, params.jobs);
    if (jobs == 1 || h_list.size() == 1) {
        for (size_t i = 0; i < h_list.size(); ++i) solve_one(i);
    } else {
        // Work queue keyed by index; rows land in their slot, so the
        // result is deterministic regardless of scheduling.
        std::atomic<size_t> next{0};
        auto drain = [&]() {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= res.rows.size()) return;
                solve_one(i);
            }
        };
        std::vector<std::thread> pool;
        const int nthreads =
            std::min<size_t>(static_cast<size_t>(jobs), h_list.size());
        pool.reserve(static_cast<size_t>(nthreads));
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(drain);
        for (auto& th : pool) th.join();
    }
    return res;
}

std::vector<ScanPoint> e_scan(PotentialPtr pot, double h, const TestFunction& tf,
                              const std::vector<double>& e_grid, double eps) {
    if (!pot) throw ConfigError("e_scan: null potential");
    if (pot->dim() != 1) throw ConfigError("e_scan: spectra require a 1d potential");
    if (!(h > 0.0)) throw ConfigError("e_scan: h must be positive");
    if (e_grid.empty()) throw ConfigError("e_scan: empty energy grid");
    for (double e : e_grid)
        if (!std::isfinite(e)) throw ConfigError("e_scan: energy grid not finite");
    const auto [lo_it, hi_it] = std::minmax_element(e_grid.begin(), e_grid.end());
    const double emin = *lo_it, emax = *hi_it;
    if (eps < 0.0) eps = 0.1 * (emax - emin);
    if (!(eps > 0.0))
        throw ConfigError("e_scan: window padding must be positive "
                          "(required when the grid has zero extent)");

    // One spectrum serves every grid point: the window is fixed while E
    // varies inside it, which is exactly the sum being profiled.
    DiscretizedOperator op = discretize_auto(pot, h, emax + eps);
    Spectrum spec = eigen_window(op, emin - eps, emax + eps);

    std::vector<ScanPoint> profile;
    profile.reserve(e_grid.size());
    for (double E : e_grid) {
        UpsilonResult u = upsilon(spec, E, tf);
        ScanPoint pt;
        pt.E = E;
        pt.value = u.value;
        pt.magnitude = std::abs(u.value);
        pt.bound = std::max(u.tail_bound, u.noise_bound);
        pt.flagged = !(pt.magnitude >= pt.bound);
        profile.push_back(pt);
    }
    return profile;
}

std::vector<double> default_h_list() { return geomspace(0.05, 0.004, 12); }

}  // namespace specprobe
