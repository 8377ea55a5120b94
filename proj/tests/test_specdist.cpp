#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "specprobe/common.hpp"
#include "specprobe/potential.hpp"
#include "specprobe/quantum1d.hpp"
#include "specprobe/specdist.hpp"
#include "specprobe/testfn.hpp"

using namespace specprobe;

namespace {

Spectrum manual_spectrum(double h, double lo, double hi, std::vector<double> lam) {
    Spectrum s;
    s.h = h;
    s.window_lo = lo;
    s.window_hi = hi;
    s.eigenvalues = std::move(lam);
    s.convergence.assign(s.eigenvalues.size(), 1e-10);
    return s;
}

double end_to_end_slope(const SweepResult& r) {
    const auto& a = r.rows.front();
    const auto& b = r.rows.back();
    return std::log(std::abs(b.value) / std::abs(a.value)) / std::log(b.h / a.h);
}

}  // namespace

TEST_SUITE("specdist") {

TEST_CASE("empty spectrum yields zero") {
    TestFunction tf = make_test_function(0, -1.0, 1.0, SupportMode::symmetric);
    Spectrum s = manual_spectrum(0.1, -1.0, -0.5, {});
    UpsilonResult u = upsilon(s, -0.7, tf);
    CHECK(u.value.real() == 0.0);
    CHECK(u.value.imag() == 0.0);
    CHECK(u.count == 0);
    CHECK(u.tail_bound == 0.0);
    CHECK(u.noise_bound == 0.0);
}

TEST_CASE("single eigenvalue at E yields phi(0)") {
    TestFunction tf = make_test_function(0, -1.0, 1.0, SupportMode::symmetric);
    Spectrum s = manual_spectrum(0.1, 0.0, 1.0, {0.5});
    UpsilonResult u = upsilon(s, 0.5, tf);
    CHECK(u.value == tf.phi(0.0));
    CHECK(u.count == 1);
}

TEST_CASE("harmonic window sum matches its structural expansion") {
    // h = 0.1, window [0, 1]: five levels at 0.1 (2j + 1), scaled arguments
    // 2j - 4. The sum must reproduce phi(0) + 2 phi(2) + 2 phi(4) evaluated
    // directly, and the terms must decay away from the center.
    auto harm = make_harmonic();
    TestFunction tf = make_test_function(0, -1.0, 1.0, SupportMode::symmetric);
    DiscretizedOperator op = discretize_auto(harm, 0.1, 1.0);
    Spectrum s = eigen_window(op, 0.0, 1.0);
    UpsilonResult u = upsilon(s, 0.5, tf);
    CHECK(u.count == 5);
    Complex direct = tf.phi(0.0) + 2.0 * (tf.phi(2.0) + tf.phi(4.0));
    CHECK(std::abs(u.value - direct) <= 1e-9);
    CHECK(std::abs(u.value.imag()) <= 1e-12);
    CHECK(std::abs(tf.phi(0.0)) > std::abs(tf.phi(2.0)));
    CHECK(std::abs(tf.phi(2.0)) > std::abs(tf.phi(4.0)));
    CHECK(u.noise_bound <= 1e-8);
    CHECK(u.tail_bound > 0.0);
    CHECK(std::isfinite(u.tail_bound));
}

TEST_CASE("window mismatch and edge placement") {
    TestFunction tf = make_test_function(0, -1.0, 1.0, SupportMode::symmetric);
    Spectrum s = manual_spectrum(0.1, 0.0, 1.0, {0.5});
    CHECK_THROWS_AS((void)upsilon(s, 1.5, tf), ConfigError);
    CHECK_THROWS_AS((void)upsilon(s, -0.5, tf), ConfigError);
    // at the window edge nothing can be certified: the bound is infinite
    UpsilonResult u = upsilon(s, 0.0, tf);
    CHECK(std::isinf(u.tail_bound));
    Spectrum bad = manual_spectrum(0.0, 0.0, 1.0, {0.5});
    CHECK_THROWS_AS((void)upsilon(bad, 0.5, tf), ConfigError);
}

TEST_CASE("value is insensitive to the window margin") {
    // Same operator, two windows: the sums differ only by far-out levels,
    // and the difference must sit inside the sum of the reported bounds.
    auto harm = make_harmonic();
    TestFunction tf = make_test_function(0, -1.0, 1.0, SupportMode::symmetric);
    DiscretizedOperator op = discretize_auto(harm, 0.05, 0.77);
    Spectrum s1 = eigen_window(op, 0.29, 0.71);
    Spectrum s2 = eigen_window(op, 0.23, 0.77);
    UpsilonResult u1 = upsilon(s1, 0.5, tf);
    UpsilonResult u2 = upsilon(s2, 0.5, tf);
    CHECK(u1.count == 4);
    CHECK(u2.count == 6);
    const double diff = std::abs(u1.value - u2.value);
    CHECK(diff <= u1.tail_bound + u2.tail_bound);
    CHECK(diff <= 5e-4);
}

TEST_CASE("evaluation is exactly linear in the test function") {
    auto harm = make_harmonic();
    TestFunction f = make_test_function(0, -1.0, 1.0, SupportMode::symmetric);
    TestFunction g = make_test_function(1, -0.8, 0.8, SupportMode::symmetric);
    DiscretizedOperator op = discretize_auto(harm, 0.05, 0.9);
    Spectrum s = eigen_window(op, 0.1, 0.9);
    const Complex a{0.7, -0.3}, b{-1.2, 0.4};
    UpsilonResult uf = upsilon(s, 0.5, f);
    UpsilonResult ug = upsilon(s, 0.5, g);
    UpsilonResult ufg = upsilon(s, 0.5, TestFunction::linear_combination(a, f, b, g));
    const Complex expect = a * uf.value + b * ug.value;
    CHECK(std::abs(ufg.value - expect) <= 1e-13 * std::abs(expect));
}

TEST_CASE("kernel shift equals an energy offset of h per unit") {
    // phi(s + a) probes E - a h: both routes hit the same kernel samples.
    auto harm = make_harmonic();
    TestFunction f = make_test_function(0, -1.0, 1.0, SupportMode::symmetric);
    DiscretizedOperator op = discretize_auto(harm, 0.05, 0.9);
    Spectrum s = eigen_window(op, 0.1, 0.9);
    UpsilonResult u1 = upsilon(s, 0.5 - 2.0 * s.h, f);
    UpsilonResult u2 = upsilon(s, 0.5, f.shifted(2.0));
    CHECK(std::abs(u1.value - u2.value) <= 1e-14 * (1.0 + std::abs(u1.value)));
}

TEST_CASE("symmetric kernels give a real sum") {
    auto harm = make_harmonic();
    TestFunction tf = make_test_function(0, -1.0, 1.0, SupportMode::symmetric);
    DiscretizedOperator op = discretize_auto(harm, 0.05, 0.9);
    Spectrum s = eigen_window(op, 0.1, 0.9);
    UpsilonResult u = upsilon(s, 0.5, tf);
    CHECK(std::abs(u.value.imag()) <= 1e-12 * std::abs(u.value.real()));
}

TEST_CASE("sweep at a nondegenerate minimum is constant") {
    // V = x^2 at E = 0: levels h (2j + 1) give the h-independent sum
    // Sum_{j>=0} phi(2j + 1) = fhat(0)/4 once the window margin stops
    // mattering. The deviation from that constant must also respect the
    // per-row truncation bound.
    auto harm = make_harmonic();
    TestFunction tf = make_test_function(0, -1.0, 1.0, SupportMode::symmetric);
    SweepParams p;
    p.e1 = -0.4;
    p.e2 = 0.4;
    SweepResult r = h_sweep(harm, 0.0, tf, geomspace(0.05, 0.008, 8), p);
    REQUIRE(r.rows.size() == 8);
    const double c = tf.fhat(0.0).real() / 4.0;
    std::vector<double> lx, ly;
    int unflagged = 0;
    for (const auto& row : r.rows) {
        REQUIRE(row.error.empty());
        CHECK(std::abs(row.value - Complex(c, 0.0)) <= row.tail_bound);
        if (!row.flagged) {
            ++unflagged;
            lx.push_back(std::log(row.h));
            ly.push_back(std::log(std::abs(row.value)));
        }
    }
    CHECK(unflagged >= 6);
    LineFit fit = fit_line(lx, ly);
    CHECK(std::abs(fit.slope) <= 0.02);
    CHECK(std::abs(r.rows.back().value - Complex(c, 0.0)) <= 1e-5);
}

TEST_CASE("sweep at a quartic minimum shows the quarter power") {
    // V = x^4 at E = 0: levels scale as h^(4/3), so the sum grows like
    // h^(-1/4); the measured exponent carries a small finite-h bias.
    auto quart = make_pure_power(2);
    TestFunction tf = make_test_function(0, -1.0, 1.0, SupportMode::symmetric);
    SweepParams p;
    p.e1 = -0.4;
    p.e2 = 0.4;
    SweepResult r = h_sweep(quart, 0.0, tf, geomspace(0.05, 0.008, 8), p);
    std::vector<double> lx, ly;
    int prev_count = 0;
    for (const auto& row : r.rows) {
        REQUIRE(row.error.empty());
        CHECK(!row.flagged);
        CHECK(row.count >= prev_count);
        prev_count = row.count;
        lx.push_back(std::log(row.h));
        ly.push_back(std::log(std::abs(row.value)));
    }
    LineFit fit = fit_line(lx, ly);
    CHECK(fit.slope >= -0.30);
    CHECK(fit.slope <= -0.22);
    CHECK(fit.rms <= 0.02);
}

TEST_CASE("sweep at a regular level is numerically zero") {
    // E = 1 in V = x^2 with the kernel support inside (0, pi): no closed
    // orbit contributes, the full lattice sum vanishes, and what remains is
    // window truncation. Every row must sit below its own bound and the
    // magnitude must fall steeply across the ladder.
    auto harm = make_harmonic();
    TestFunction tf = make_test_function(3, 0.05, 3.09, SupportMode::one_sided);
    SweepParams p;
    p.e1 = 0.5;
    p.e2 = 1.5;
    SweepResult r = h_sweep(harm, 1.0, tf, geomspace(0.05, 0.008, 8), p);
    for (const auto& row : r.rows) {
        REQUIRE(row.error.empty());
        CHECK(row.flagged);
        CHECK(std::abs(row.value) <= row.tail_bound);
    }
    CHECK(end_to_end_slope(r) >= 3.0);
    CHECK(std::abs(r.rows.back().value) <= 1e-3);
}

TEST_CASE("sweep input validation") {
    auto harm = make_harmonic();
    TestFunction tf = make_test_function(0, -1.0, 1.0, SupportMode::symmetric);
    SweepParams p;
    p.e1 = -0.4;
    p.e2 = 0.4;
    CHECK_THROWS_AS((void)h_sweep(harm, 0.0, tf, {}, p), ConfigError);
    CHECK_THROWS_AS((void)h_sweep(harm, 0.0, tf, {0.01, 0.05}, p), ConfigError);
    CHECK_THROWS_AS((void)h_sweep(harm, 0.9, tf, {0.05, 0.01}, p), ConfigError);
    SweepParams degenerate;
    degenerate.e1 = 0.5;
    degenerate.e2 = 0.5;
    CHECK_THROWS_AS((void)h_sweep(harm, 0.5, tf, {0.05, 0.01}, degenerate),
                    ConfigError);
}

TEST_CASE("sweep annotates solver failures per row") {
    // A sampling box too small to confine the window cannot be solved;
    // the sweep must report that on the row instead of aborting.
    auto cramped = make_harmonic(1.0, 0.5);
    TestFunction tf = make_test_function(0, -1.0, 1.0, SupportMode::symmetric);
    SweepParams p;
    p.e1 = -0.4;
    p.e2 = 0.4;
    SweepResult r = h_sweep(cramped, 0.0, tf, {0.05, 0.025}, p);
    REQUIRE(r.rows.size() == 2);
    for (const auto& row : r.rows) {
        CHECK(row.flagged);
        CHECK(!row.error.empty());
        CHECK(row.error.find("confine") != std::string::npos);
        CHECK(row.value == Complex{0.0, 0.0});
    }
}

TEST_CASE("sweep worker pool is deterministic") {
    auto harm = make_harmonic();
    TestFunction tf = make_test_function(0, -1.0, 1.0, SupportMode::symmetric);
    SweepParams p1;
    p1.e1 = -0.4;
    p1.e2 = 0.4;
    SweepParams p3 = p1;
    p3.jobs = 3;
    std::vector<double> hs = geomspace(0.05, 0.02, 4);
    SweepResult r1 = h_sweep(harm, 0.0, tf, hs, p1);
    SweepResult r3 = h_sweep(harm, 0.0, tf, hs, p3);
    REQUIRE(r1.rows.size() == r3.rows.size());
    for (size_t i = 0; i < r1.rows.size(); ++i) {
        CHECK(r1.rows[i].h == r3.rows[i].h);
        CHECK(r1.rows[i].value == r3.rows[i].value);
        CHECK(r1.rows[i].count == r3.rows[i].count);
        CHECK(r1.rows[i].tail_bound == r3.rows[i].tail_bound);
        CHECK(r1.rows[i].flagged == r3.rows[i].flagged);
    }
}

TEST_CASE("scan localizes double well critical levels") {
    // (x^2 - 1)^2 has well bottoms at E = 0 and the barrier at E = 1. With
    // a flattened kernel the profile must spike near both and stay quiet at
    // regular energies in between.
    auto dw = make_double_well();
    TestFunction tf = make_test_function(3, -1.0, 1.0, SupportMode::symmetric);
    std::vector<double> grid;
    for (int i = 0; i <= 32; ++i) grid.push_back(-0.2 + 1.6 * i / 32.0);
    auto prof = e_scan(dw, 0.01, tf, grid);
    REQUIRE(prof.size() == grid.size());
    double peak0 = 0.0, at0 = 0.0, peak1 = 0.0, at1 = 0.0, bg = 0.0;
    bool peak1_unflagged = false;
    for (const auto& pt : prof) {
        if (std::abs(pt.E) <= 0.15 && pt.magnitude > peak0) {
            peak0 = pt.magnitude;
            at0 = pt.E;
        }
        if (std::abs(pt.E - 1.0) <= 0.15 && pt.magnitude > peak1) {
            peak1 = pt.magnitude;
            at1 = pt.E;
            peak1_unflagged = !pt.flagged;
        }
        if (pt.E >= 0.3 && pt.E <= 0.7) bg = std::max(bg, pt.magnitude);
    }
    CHECK(peak0 >= 5.0 * bg);
    CHECK(peak1 >= 5.0 * bg);
    CHECK(std::abs(at0) <= 0.12);
    CHECK(std::abs(at1 - 1.0) <= 0.06);
    CHECK(peak1_unflagged);
}

TEST_CASE("scan without kernel flattening has no contrast") {
    // Without vanishing moments the smooth level-density background
    // swamps the critical-level signal: documented failure mode.
    auto dw = make_double_well();
    TestFunction tf = make_test_function(0, -1.0, 1.0, SupportMode::symmetric);
    std::vector<double> grid;
    for (int i = 0; i <= 32; ++i) grid.push_back(-0.2 + 1.6 * i / 32.0);
    auto prof = e_scan(dw, 0.01, tf, grid);
    double peak1 = 0.0, bg = 0.0;
    for (const auto& pt : prof) {
        if (std::abs(pt.E - 1.0) <= 0.15) peak1 = std::max(peak1, pt.magnitude);
        if (pt.E >= 0.3 && pt.E <= 0.7) bg = std::max(bg, pt.magnitude);
    }
    CHECK(peak1 <= 2.5 * bg);
}

TEST_CASE("scan across a band of regular levels is flat") {
    auto harm = make_harmonic();
    TestFunction tf = make_test_function(3, -1.0, 1.0, SupportMode::symmetric);
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(0.5 + i * 0.05);
    auto prof = e_scan(harm, 0.01, tf, grid);
    for (const auto& pt : prof) {
        CHECK(pt.flagged);
        CHECK(pt.magnitude <= 1e-3);
    }
}

TEST_CASE("scan input validation") {
    auto harm = make_harmonic();
    TestFunction tf = make_test_function(0, -1.0, 1.0, SupportMode::symmetric);
    CHECK_THROWS_AS((void)e_scan(harm, 0.01, tf, {}), ConfigError);
    CHECK_THROWS_AS((void)e_scan(harm, 0.0, tf, {0.5, 0.6}), ConfigError);
    // zero-extent grid needs an explicit margin
    CHECK_THROWS_AS((void)e_scan(harm, 0.01, tf, {0.5}), ConfigError);
    auto one = e_scan(harm, 0.01, tf, {0.5}, 0.1);
    CHECK(one.size() == 1);
}

TEST_CASE("default ladder is geometric from 0.05 to 0.004") {
    std::vector<double> hs = default_h_list();
    REQUIRE(hs.size() == 12);
    CHECK(hs.front() == 0.05);
    CHECK(std::abs(hs.back() - 0.004) <= 1e-12);
    const double q = hs[1] / hs[0];
    for (size_t i = 1; i < hs.size(); ++i) {
        CHECK(hs[i] < hs[i - 1]);
        CHECK(std::abs(hs[i] / hs[i - 1] - q) <= 1e-12);
    }
}

}  // TEST_SUITE
