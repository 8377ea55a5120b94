#pragma once

#include <vector>

#include "specprobe/common.hpp"
#include "specprobe/testfn.hpp"

namespace specprobe {

enum class ExtremumType { minimum, maximum };

/// Which branch of the order table a critical point falls into. The split
/// is driven by gamma = n(k+1)/(2k): a maximum picks up a log factor
/// exactly when gamma is an integer and n is odd; integer gamma with even
/// n collapses back to the generic pure-power form.
enum class SingularCase { minimum, max_generic, max_log, max_even_integer };

/// Leading-order data of the spectral-sum contribution of one isolated
/// critical point of degree 2k in dimension n:
/// |sum| ~ C h^alpha log(1/h)^m at the critical level.
struct SingularityClass {
    int n = 1;
    int k = 1;
    ExtremumType type = ExtremumType::minimum;
    double alpha = 0.0;  // n/(2k) - n/2
    int m = 0;           // log power, 0 or 1
    SingularCase tag = SingularCase::minimum;
};

SingularityClass classify_singularity(int n, int k, ExtremumType type);

/// All classes over n = 1..n_max, k = 1..k_max, minimum then maximum per
/// (n, k). Source data for the order-table emitter.
std::vector<SingularityClass> singularity_table(int n_max, int k_max);

/// Kernel functional of the leading minimum-case coefficient:
/// integral over u, v > 0 of phi(u^2 + v^(2k)) u^(n-1) v^(n-1) du dv.
/// Relative accuracy ~1e-6; complex because shifted kernels are complex.
Complex min_functional(const TestFunction& tf, int n, int k);

/// One-sided weighted moments of the maximum-case coefficient; the
/// universal constants multiplying them are unknown, so recoveries must
/// use ratios in which they cancel.
struct MaxFunctionals {
    double gamma = 0.0;        // n(k+1)/(2k)
    Complex i_plus{0.0, 0.0};  // integral over t > 0 of t^(gamma-1) phi(t)
    Complex i_minus{0.0, 0.0}; // same against phi(-t)
};
MaxFunctionals max_functionals(const TestFunction& tf, int n, int k);

/// Leading order of a phase-space-homogeneous singularity of even degree
/// k > 2 of the full symbol: exponent 2n/k - n, and the one-sided moment
/// (1/k) integral of t^(2n/k - 1) phi(+-t + p1 shift), the + branch for a
/// minimum, the - branch for a maximum.
struct PseudoInvariant {
    double exponent = 0.0;
    Complex t_functional{0.0, 0.0};
};
PseudoInvariant pseudo_invariant(int n, int k, const TestFunction& tf,
                                 double p1_shift, ExtremumType type);

/// Subprincipal correction hook: replaces phi(t) by phi(t + p1(z0)).
TestFunction subprincipal_shift_hook(const TestFunction& tf, double p1_at_z0);

/// integral over t in (0, inf) of t^(gamma-1) phi(sign*t + shift) dt for
/// gamma > 0; the power-law endpoint is handled by dyadic refinement.
/// Building block of the maximum-case and pseudo-differential moments,
/// exposed for cross-checks.
Complex one_sided_moment(const TestFunction& tf, double gamma, int sign,
                         double shift);

}  // namespace specprobe
