#pragma once

#include <string>
#include <utility>
#include <vector>

#include "specprobe/common.hpp"
#include "specprobe/potential.hpp"
#include "specprobe/specdist.hpp"
#include "specprobe/testfn.hpp"

namespace specprobe {

/// Least-squares decomposition of a sweep into the model
///   |Y(h)| = C * h^alpha * log(1/h)^m,    m in {0, 1},
/// fitted on log|Y|. m is a model selector, not a free coefficient: the
/// m = 1 branch subtracts log log(1/h) from the data and refits the same
/// two-parameter line, and it wins only when its residual is smaller by a
/// 5% margin (spurious log detection is the dominant failure mode over a
/// single decade of h, so ties go to m = 0).
struct FitResult {
    double alpha = 0.0;    // exponent of h
    int m = 0;             // log(1/h) exponent, 0 or 1
    double amplitude = 0.0;  // C = exp(log_c)
    double log_c = 0.0;
    double rms = 0.0;      // residual rms on the log scale
    double var_log_c = 0.0;
    double var_alpha = 0.0;
    double cov_log_c_alpha = 0.0;
    double center_log_h = 0.0;  // mean log h of the rows used
    int used = 0;               // rows entering the fit
    /// Every clean row sat below its own truncation/noise floor; the
    /// sweep is indistinguishable from zero and no fit is attached.
    bool numerically_zero = false;

    double alpha_sigma() const;
    /// C * h^alpha * log(1/h)^m evaluated at the central h of the fit;
    /// amplitudes compared between two fits should be read here, where
    /// the covariance of (log C, alpha) is smallest, not at h = 1.
    double amplitude_at_center() const;
};

/// Fits the power-log model to a sweep. Requires >= 6 h-points spanning
/// at least half a decade, all with h < 1. Rows carrying solver errors
/// are dropped; rows whose magnitude sits below the reported floor are
/// excluded as outliers. If every clean row is below the floor the
/// result is the numerically-zero verdict; if fewer than four rows
/// survive the cuts a SolverError is raised instead of a shaky fit.
FitResult fit_power_log(const SweepResult& sweep);

enum class LevelVerdict { regular, critical, inconclusive };
enum class ExtremumVerdict { minimum, maximum, inconclusive };

struct LevelClass {
    LevelVerdict verdict = LevelVerdict::inconclusive;
    FitResult fit;     // attached unless the sweep was numerically zero
    std::string note;  // criterion that produced the verdict
};

/// Knobs shared by the detection pipeline. Every op centers its energy
/// band on the level under study; band_halfwidth = 0 lets each op pick
/// its own width (classification 0.8, growth probe 0.45, reflection
/// probes from the probe geometry, density recovery 1.0).
struct DetectorParams {
    std::vector<double> h_list;        // empty = op-specific default ladder
    double band_halfwidth = 0.0;
    double eps = -1.0;                 // window margin, forwarded to sweeps
    int jobs = 1;
    bool weak_mode = false;            // force the bounded-growth criterion
    double probe_offset = 18.0;        // |s| center of the reflection pair
    double probe_halfwidth = 0.5;      // fhat half-width of probe kernels
    double density_halfwidth = 0.25;   // fhat half-width of density bumps
    double rms_gate = 0.25;            // max fit rms for a confident verdict
    double alpha_sigma_gate = 0.15;    // max sigma(alpha) for a verdict
    int hessian_centers = 16;          // density samples for curvature fits
};

/// Decides regular / critical / inconclusive at energy E from the decay
/// of an h-sweep. With a background-suppressing kernel (weyl_kill_check
/// true) the strong criterion applies: fitted slope >= 3 stands in for
/// rapid decay, anything slower is critical. With a kernel that keeps
/// the smooth background, or when weak_mode is set, only boundedness is
/// decidable: growth (m = 1 or slope < -0.05) is critical, a bounded
/// response is reported regular. A fit whose residual exceeds the gates
/// returns an explicit inconclusive verdict, never a silent guess.
LevelClass classify_level(PotentialPtr pot, double E, const TestFunction& tf,
                          const DetectorParams& params = {});

/// Inversion of the order table for extrema: alpha = n(1-k)/(2k), so
/// k = n/(n + 2 alpha). The estimate is rejected (accepted = false) when
/// the distance from k_real to the nearest integer exceeds the
/// uncertainty propagated from alpha_sigma.
struct DegreeEstimate {
    int k = 0;
    double k_real = 0.0;
    double k_sigma = 0.0;
    bool accepted = false;
};
DegreeEstimate infer_degree(double alpha, int n, double alpha_sigma = 0.0);

/// Linear fit |Y(h)| = offset + slope * log(1/h) at a fixed energy,
/// using a narrow symmetric kernel that keeps the smooth background
/// (fhat(0) != 0). A background constant stays bounded as h -> 0; a
/// quadratic maximum on an odd-dimensional manifold adds the log-growing
/// term, so growth == true is the m = 1 signature.
struct LogProbe {
    double slope = 0.0;
    double offset = 0.0;
    double slope_sigma = 0.0;
    double rms = 0.0;
    int used = 0;
    bool growth = false;
    double halfwidth = 0.0;  // kernel half-width after the period guard
};
LogProbe log_probe(PotentialPtr pot, double e_c, const DetectorParams& params = {});

/// Minimum / maximum discrimination at a critical level. m = 1 ends it
/// immediately (log growth happens only at maxima). Otherwise a
/// reflection pair phi(s - a), phi(-s - a) (the same even bump shifted
/// to +a and -a) probes the spectrum just above and just below E_c: a
/// minimum has levels only above, so the response ratio departs from 1
/// by orders of magnitude, while a maximum answers on both sides with
/// O(1) asymmetry. The threshold asks the log-ratio to clear both a
/// fixed margin and 3x its own scatter before declaring a minimum.
struct TypeResult {
    ExtremumVerdict verdict = ExtremumVerdict::inconclusive;
    double log_ratio = 0.0;   // mean log(|Y_above| / |Y_below|)
    double scatter = 0.0;     // standard error of the mean log-ratio
    std::string note;
};
TypeResult infer_type(PotentialPtr pot, double e_c, const FitResult& fit,
                      const DetectorParams& params = {});

/// Ratio of fitted sweep amplitudes at matching critical levels of two
/// potentials sharing the same kernel. The universal constants and the
/// kernel functional cancel, leaving A(V_a)/A(V_b), the ratio of
/// spherical means |V_2k|^(-n/2k). Amplitudes are compared at the
/// central log h of the fits. Throws when the two fits disagree on the
/// singularity class (degree or log exponent).
double recover_spherical_mean_ratio(PotentialPtr pot_a, double ec_a,
                                    PotentialPtr pot_b, double ec_b,
                                    const TestFunction& tf,
                                    const DetectorParams& params = {});

/// Result of the curvature fit: r directions hyperbolic (negative
/// Hessian eigenvalues mu_j = -2 alpha_j^2, listed first, ascending),
/// n - r elliptic (mu_j = +2 alpha_j^2, ascending).
struct HessianSpectrum {
    std::vector<double> alphas;
    int signature_r = 0;
    double rms = 0.0;              // log-scale residual of the best model
    std::vector<double> mu;        // Hessian eigenvalues, same order
};

/// Recovers {alpha_j} and the signature from samples (t_i, d_i) of the
/// return-density product  d(t) = 1 / | prod_{j<=r} sinh(alpha_j t)
/// prod_{j>r} sin(alpha_j t) |.  Nonlinear least squares on log d over
/// every signature r in 0..n with a multi-start Levenberg-Marquardt
/// refinement (analytic derivatives -t coth / -t cot). Needs >= 8(n+1)
/// samples at positive times away from the zeros of the product; a best
/// residual above 0.05 raises SolverError instead of returning junk.
HessianSpectrum recover_hessian_spectrum(
    const std::vector<std::pair<double, double>>& samples, int n);

struct DensitySample {
    double t = 0.0;
    double value = 0.0;  // recovered return density at time t
    double alpha = 0.0;  // fitted sweep exponent, |alpha| <= 0.1 enforced
};

/// Estimates the linearized return density at a nondegenerate critical
/// point z0 (one dimension only) from quantum data alone: for each
/// center t_i a one-sided bump supported on (t_i - w, t_i + w) drives an
/// h-sweep at E_c, whose fitted constant, divided by the kernel's time
/// mass (1/2pi) * integral of fhat, converges to the density. Centers
/// must clear the zeros of the linearized factor and stay below the
/// shortest classical period in the band; a sweep with |alpha| > 0.1 is
/// reported as a pipeline error since the limit only exists flat.
std::vector<DensitySample> density_from_quantum(PotentialPtr pot, double z0,
                                                double e_c,
                                                const std::vector<double>& centers,
                                                const DetectorParams& params = {});

/// Everything the pipeline can say about one critical level.
struct CriticalReport {
    double e_c = 0.0;
    LevelClass classification;
    DegreeEstimate degree;
    ExtremumVerdict type = ExtremumVerdict::inconclusive;
    int m = 0;                    // log exponent, from the growth probe
    double alpha = 0.0;           // fitted order of the sweep
    double a_ratio = 0.0;         // amplitude ratio against the reference
    double a_value = 0.0;         // spherical mean estimate, a_ratio * A_ref
    std::string calibration;      // reference potential description
    std::vector<double> hessian_alphas;  // quadratic levels only
    std::vector<double> hessian_mu;
    int signature_r = 0;
    std::vector<std::string> diagnostics;
};

/// One-sided kernel sized from the measured minimal periods in the band
/// around e_c: support (0.05, min(3.0, 0.9 * shortest period)). This is the
/// kernel used wherever a classification kernel is not supplied explicitly.
TestFunction default_classification_kernel(const Potential& pot, double e_c,
                                           double band_halfwidth = 0.0);

/// Full desk pipeline at one energy: classify, invert the order to the
/// degree, settle the type (growth probe first, reflection pair second),
/// calibrate the spherical mean against x^(2k) (minimum) or
/// x^(2k+2) - x^(2k) (maximum), and, for quadratic levels, recover the
/// Hessian spectrum through the density route. Steps that cannot run
/// leave their fields defaulted and explain themselves in diagnostics.
CriticalReport analyze_critical_level(PotentialPtr pot, double e_c,
                                      const DetectorParams& params = {});

}  // namespace specprobe
