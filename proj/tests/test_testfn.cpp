#include <cmath>
#include <complex>

#include "doctest.h"
#include "specprobe/testfn.hpp"

using namespace specprobe;

namespace {

// Largest |phi| on [s-3, s+3]; dodges the zeros of the oscillating tail.
double envelope(const TestFunction& tf, double s) {
    double m = 0.0;
    for (double u = s - 3.0; u <= s + 3.0; u += 0.25)
        m = std::max(m, std::abs(tf.phi(u)));
    return m;
}

}  // namespace

TEST_SUITE("testfn") {

TEST_CASE("grid evaluation matches direct quadrature") {
    TestFunction tf = make_test_function(0, -1.0, 1.0, SupportMode::symmetric);
    const double tol = 1e-8 * tf.phi_peak();
    for (double s : {0.0, 0.3, 1.7, 9.97, 53.1, 150.2}) {
        CHECK(std::abs(tf.phi(s) - tf.phi_direct(s)) <= tol);
        CHECK(std::abs(tf.phi(-s) - std::conj(tf.phi(s))) <= 1e-14);
    }

    TestFunction flat = make_test_function(3, -3.0, 3.0, SupportMode::symmetric);
    const double tol2 = 1e-8 * flat.phi_peak();
    for (double s : {0.0, 0.5, 4.2, 31.7})
        CHECK(std::abs(flat.phi(s) - flat.phi_direct(s)) <= tol2);

    TestFunction os =
        make_test_function(0, 0.2, kPi - 0.2, SupportMode::one_sided);
    const double tol3 = 1e-8 * os.phi_peak();
    for (double s : {0.0, 1.1, 17.3, 90.0})
        CHECK(std::abs(os.phi(s) - os.phi_direct(s)) <= tol3);
}

TEST_CASE("integral identities") {
    TestFunction tf = make_test_function(0, -1.0, 1.0, SupportMode::symmetric);
    // phi(0) = (1/2pi) integral of fhat; independent quadrature route.
    Complex ihat = tf.fhat_integral();
    CHECK(std::abs(tf.phi(0.0) - ihat / kTwoPi) <= 1e-10);
    // integral of the standard bump exp(-1/(1-u^2)) over (-1,1)
    CHECK(ihat.real() == doctest::Approx(0.4439938162).epsilon(1e-8));
    CHECK(std::abs(ihat.imag()) <= 1e-14);
    // integral_phi equals fhat(0)
    CHECK(std::abs(tf.integral_phi() - tf.fhat(0.0)) <= 1e-15);

    // symmetric real fhat gives a real, even phi
    for (double s : {0.4, 2.2, 8.0})
        CHECK(std::abs(tf.phi(s).imag()) <= 1e-12 * tf.phi_peak());
}

TEST_CASE("tail bound dominates the far field") {
    TestFunction tf = make_test_function(1, -2.0, 2.0, SupportMode::symmetric);
    for (double s : {30.0, 60.0, 120.0, 160.0}) {
        const double b = tf.tail_bound(s);
        CHECK(std::abs(tf.phi_direct(s)) <= b);
        CHECK(std::abs(tf.phi_direct(s + 0.37)) <= b);  // valid beyond s too
    }
    CHECK(tf.tail_bound(60.0) < tf.tail_bound(30.0));

    // the fitted envelope beats the polynomial constant well past the grid
    CHECK(tf.tail_bound(800.0) < 0.2 * tf.c8() / std::pow(800.0, 8));

    // mass bound dominates a direct integral of |phi| over [60, 190]
    double mass = 0.0;
    for (double s = 60.0; s < 190.0; s += 0.05)
        mass += std::abs(tf.phi(s)) * 0.05;
    CHECK(mass <= tf.tail_mass(60.0));
    CHECK(tf.tail_mass(60.0) < tf.tail_mass(30.0));
}

TEST_CASE("measured tail decay of the standard bump") {
    TestFunction tf = make_test_function(0, -1.0, 1.0, SupportMode::symmetric);
    // Smooth compact fhat decays super-polynomially but sub-exponentially,
    // about exp(-sqrt(2 s)) for this profile. Honest measured bounds:
    const double e1 = envelope(tf, 1.0);
    const double e50 = envelope(tf, 50.0);
    CHECK(e50 / e1 <= 2e-3);
    const double e10 = envelope(tf, 10.0);
    const double e100 = envelope(tf, 100.0);
    const double slope = (std::log(e100) - std::log(e10)) /
                         (std::log(100.0) - std::log(10.0));
    CHECK(slope <= -3.0);
}

TEST_CASE("construction validation") {
    CHECK_THROWS_AS(make_test_function(0, 1.0, 1.0, SupportMode::symmetric),
                    ConfigError);
    CHECK_THROWS_AS(make_test_function(0, 2.0, -2.0, SupportMode::symmetric),
                    ConfigError);
    CHECK_THROWS_AS(make_test_function(0, -1.0, 1.5, SupportMode::symmetric),
                    ConfigError);
    CHECK_THROWS_AS(make_test_function(0, -0.5, 1.0, SupportMode::one_sided),
                    ConfigError);
    CHECK_THROWS_AS(make_test_function(-1, -1.0, 1.0, SupportMode::symmetric),
                    ConfigError);
    CHECK_NOTHROW(make_test_function(0, 0.2, kPi - 0.2, SupportMode::one_sided));
    CHECK_NOTHROW(make_test_function(2, -4.0, -0.5, SupportMode::one_sided));
}

TEST_CASE("shift and linearity are exact") {
    TestFunction tf = make_test_function(1, -1.5, 1.5, SupportMode::symmetric);
    TestFunction sh = tf.shifted(0.7);
    for (double s : {-2.0, 0.0, 3.3})
        CHECK(std::abs(sh.phi(s) - tf.phi(s + 0.7)) == 0.0);

    // shifted transform picks up the phase e^{-i a t}
    const double a = 15.0, t = 0.9;
    TestFunction probe = tf.shifted(-a);
    Complex expect = tf.fhat(t) * std::polar(1.0, a * t);
    CHECK(std::abs(probe.fhat(t) - expect) <= 1e-14 * std::abs(expect));

    TestFunction g = make_test_function(0, -1.0, 1.0, SupportMode::symmetric);
    const Complex ca{0.7, -0.2}, cb{-1.3, 0.4};
    TestFunction combo = TestFunction::linear_combination(ca, tf, cb, g);
    for (double s : {0.0, 1.2, 7.7}) {
        Complex direct = ca * tf.phi(s) + cb * g.phi(s);
        CHECK(std::abs(combo.phi(s) - direct) <= 1e-15 * (1.0 + std::abs(direct)));
    }
}

TEST_CASE("weyl background suppression check") {
    // plain bump: fhat(0) = e^{-1} != 0
    CHECK_FALSE(weyl_kill_check(
        make_test_function(0, -1.0, 1.0, SupportMode::symmetric)));
    // flatness orders 1..4
    for (int j0 : {1, 2, 3, 4})
        CHECK(weyl_kill_check(
            make_test_function(j0, -1.0, 1.0, SupportMode::symmetric)));
    // support away from zero kills every derivative trivially
    CHECK(weyl_kill_check(
        make_test_function(0, 0.2, kPi - 0.2, SupportMode::one_sided)));
    CHECK(weyl_kill_check(
        make_test_function(0, -2.0, -0.3, SupportMode::one_sided)));
}

}  // TEST_SUITE
