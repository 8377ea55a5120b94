#pragma once

#include <string>
#include <vector>

#include "specprobe/common.hpp"
#include "specprobe/potential.hpp"
#include "specprobe/quantum1d.hpp"
#include "specprobe/testfn.hpp"

namespace specprobe {

/// One smoothed-distribution evaluation Sum phi((lambda_j - E)/h) over the
/// spectral window: the exact finite sum plus certified bounds on what was
/// not summed exactly.
struct UpsilonResult {
    Complex value{0.0, 0.0};
    int count = 0;             // eigenvalues inside the window
    double tail_bound = 0.0;   // beyond-grid phi terms + out-of-window truncation
    double noise_bound = 0.0;  // propagated per-eigenvalue convergence estimates
};

/// Evaluate the sum for one spectrum. E must lie inside the spectral
/// window. The tail bound grows to infinity when E sits too close to a
/// window edge for the kernel's decay machinery to certify anything.
UpsilonResult upsilon(const Spectrum& spec, double E, const TestFunction& tf);

/// Upper bound on sup |phi'|: (1/2pi) integral |t phi_hat(t)| dt.
double phi_lipschitz_bound(const TestFunction& tf);

struct SweepParams {
    double e1 = 0.0;    // energy band of interest, lower end
    double e2 = 0.0;    // upper end
    double eps = -1.0;  // window padding; negative selects 0.1 (e2 - e1)
    int jobs = 1;       // worker threads across independent h points
};

struct SweepRow {
    double h = 0.0;
    Complex value{0.0, 0.0};
    int count = 0;
    double tail_bound = 0.0;
    double noise_bound = 0.0;
    bool flagged = false;  // magnitude below its bounds, or the solve failed
    std::string error;     // per-h failure annotation, empty when solved
};

struct SweepResult {
    double E = 0.0;
    double window_lo = 0.0;
    double window_hi = 0.0;
    std::string tf_note;  // human-readable test-function reference
    std::vector<SweepRow> rows;  // ordered as h_list, strictly decreasing
};

/// One spectrum solve + one upsilon per h. Solver failures are caught and
/// annotated on their row instead of aborting the sweep. jobs > 1 runs the
/// h points in a worker pool; results are ordered by index regardless.
SweepResult h_sweep(PotentialPtr pot, double E, const TestFunction& tf,
                    const std::vector<double>& h_list, const SweepParams& params);

struct ScanPoint {
    double E = 0.0;
    Complex value{0.0, 0.0};
    double magnitude = 0.0;
    double bound = 0.0;  // max(tail, noise)
    bool flagged = false;
};

/// |Upsilon| profile over an energy grid at fixed h, reusing a single
/// spectrum solve for the whole grid. Peaks flag candidate critical levels.
std::vector<ScanPoint> e_scan(PotentialPtr pot, double h, const TestFunction& tf,
                              const std::vector<double>& e_grid, double eps = -1.0);

/// Default geometric ladder: 12 points from 0.05 down to 0.004.
std::vector<double> default_h_list();

}  // namespace specprobe
