#pragma once

#include <memory>
#include <vector>

#include "specprobe/common.hpp"

namespace specprobe {

/// Support layout of the Fourier transform of a test function.
enum class SupportMode { symmetric, one_sided };

namespace detail {

/// One analytic building block: fhat(t) = t^(2*j0) * bump(u(t)) where
/// bump(u) = exp(-1/(1-u^2)) on (-1,1) and u maps the support [tlo, thi]
/// to (-1,1). phi(s) = (1/2pi) integral of fhat(t) exp(-i t s) dt is
/// precomputed on a uniform s-grid over [0, s_max]; phi(-s) = conj(phi(s))
/// because fhat is real.
struct BumpKernel {
    int j0 = 0;
    double tlo = 0.0;
    double thi = 0.0;
    SupportMode mode = SupportMode::symmetric;

    double smax = 0.0;
    double ds = 0.0;
    std::vector<Complex> grid;  // phi samples at s = k*ds, k >= 0
    double c8 = 0.0;            // |phi(s)| <= c8 / s^8 for |s| >= 1
    // Envelope model |phi(s)| <= env_amp * exp(-env_rate * sqrt(|s|)),
    // fitted on the grid; far tighter than c8/s^8 at large |s|, where the
    // polynomial constant is dominated by the product maximum near 256/width.
    double env_amp = 0.0;
    double env_rate = 0.0;
    double fhat_peak = 0.0;
    double phi_peak = 0.0;

    double fhat(double t) const;
    Complex phi(double s) const;         // cubic interpolation on the grid
    Complex phi_direct(double s) const;  // quadrature, grid-free reference
};

}  // namespace detail

/// Admissible test function: Schwartz-class phi whose Fourier transform
/// fhat is smooth and compactly supported. Flatness of fhat at t = 0
/// (order t^(2*j0)) suppresses the smooth Weyl background of spectral
/// sums; keeping the support inside the shortest classical period
/// suppresses periodic-orbit returns.
///
/// A TestFunction is a finite sum of terms coef * base_phi(s + shift);
/// shifts realize probe offsets (phi(s - a) concentrates the spectral
/// probe at E + a*h) and linear combinations support superposition checks.
/// Immutable after construction; evaluation is pure and thread-safe.
class TestFunction {
  public:
    struct Term {
        Complex coef;
        std::shared_ptr<const detail::BumpKernel> kernel;
        double shift;  // phi_term(s) = coef * kernel->phi(s + shift)
    };

    /// phi(s); values with |s + shift| beyond the cache extent are dropped
    /// (their size is covered by tail_bound).
    Complex phi(double s) const;

    /// Grid-free reference evaluation by direct quadrature.
    Complex phi_direct(double s) const;

    /// Fourier transform; complex once shifts are involved
    /// (phi(s + a) has transform fhat(t) * exp(-i a t)).
    Complex fhat(double t) const;

    /// Upper bound for |phi(s')| valid for all |s'| >= abs_s > max shift:
    /// per term, the smaller of the c8/s^8 constant and the fitted
    /// exponential-of-sqrt envelope.
    double tail_bound(double abs_s) const;

    /// Upper bound for the one-sided mass integral of |phi| from abs_s to
    /// infinity; used for truncation accounting of spectral sums.
    double tail_mass(double abs_s) const;

    /// integral of phi over R, equal to fhat(0).
    Complex integral_phi() const { return fhat(0.0); }

    /// integral of fhat over its support (quadrature).
    Complex fhat_integral() const;

    double support_lo() const { return tlo_; }
    double support_hi() const { return thi_; }
    int j0() const { return j0_; }
    SupportMode mode() const { return mode_; }
    double s_max() const { return smax_eff_; }
    double c8() const;
    double fhat_peak() const;
    double phi_peak() const;
    const std::vector<Term>& terms() const { return terms_; }

    /// Shifted function s -> phi(s + ds).
    TestFunction shifted(double ds) const;

    /// a*f + b*g. Supports and tail constants combine conservatively.
    static TestFunction linear_combination(Complex a, const TestFunction& f,
                                           Complex b, const TestFunction& g);

    friend TestFunction make_test_function(int, double, double, SupportMode);

  private:
    TestFunction() = default;
    void refresh_envelope();

    std::vector<Term> terms_;
    int j0_ = 0;
    double tlo_ = 0.0, thi_ = 0.0;
    SupportMode mode_ = SupportMode::symmetric;
    double smax_eff_ = 0.0;
};

/// Builds the standard admissible test function: fhat is the smooth bump
/// exp(-1/(1-u^2)) rescaled to [t_minus, t_plus], multiplied by t^(2*j0).
/// symmetric mode requires a support centered at 0; one_sided mode
/// requires 0 outside the open support.
TestFunction make_test_function(int j0, double t_minus, double t_plus,
                                SupportMode mode);

/// phi(s) via the cached grid; relative accuracy ~1e-8 of the peak for
/// |s| <= s_max, zero beyond (covered by tail_bound).
inline Complex phi_eval(const TestFunction& tf, double s) { return tf.phi(s); }

/// True iff the derivatives of fhat at 0 vanish through order 2*j0 - 1
/// (and fhat(0) itself vanishes), so the function suppresses every term
/// of the smooth Weyl expansion. Orders 0..3 are checked by high-order
/// finite differences at tolerance 1e-9; higher orders through the
/// factored form, as a log-log slope bound of |fhat| near 0.
bool weyl_kill_check(const TestFunction& tf);

}  // namespace specprobe
