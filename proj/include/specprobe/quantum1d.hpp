#pragma once

#include <vector>

#include <Eigen/Dense>

#include "specprobe/common.hpp"
#include "specprobe/potential.hpp"

namespace specprobe {

/// Dirichlet finite-difference discretization of -h^2 d^2/dx^2 + V on
/// [-L, L] with N interior points: symmetric tridiagonal with diagonal
/// entries 2h^2/dx^2 + V(x_i) and constant off-diagonal -h^2/dx^2.
struct DiscretizedOperator {
    PotentialPtr pot;
    double h = 0.0;
    double box = 0.0;    // half-width L
    int n_interior = 0;  // N
    double dx = 0.0;
    double offdiag = 0.0;
    Eigen::VectorXd diag;
    double e_top = 0.0;  // largest energy the operator is built to resolve
};

/// Eigenvalue window with provenance and per-eigenvalue convergence
/// estimates from the refinement ladder N -> 2N+1 -> 4N+3.
struct Spectrum {
    double h = 0.0;
    double window_lo = 0.0;
    double window_hi = 0.0;
    std::vector<double> eigenvalues;  // sorted ascending, all inside the window
    std::vector<double> convergence;  // |extrapolated - finest pair| per eigenvalue
    double box = 0.0;
    int n_grid = 0;  // base interior point count
};

/// Smallest half-width L such that V >= 2*e_top everywhere beyond L on both
/// sides and the tunneling action integral of sqrt(V - e_top) from the
/// classical turning point out to L is at least 14*h. The barrier rule alone
/// leaves a measurable Dirichlet truncation error at moderate h; the action
/// margin pushes it orders below the eigenvalue tolerance.
double auto_box(const Potential& pot, double e_top, double h);

/// Build the operator. Rejects grids below the resolution rule
/// dx <= h/10 (N >= 20 L / h) and boxes with V(+-L) < e_top.
DiscretizedOperator discretize(PotentialPtr pot, double h, double L, int N,
                               double e_top);

/// discretize with the automatic box and the smallest N passing the
/// resolution rule.
DiscretizedOperator discretize_auto(PotentialPtr pot, double h, double e_top);

/// All eigenvalues in [a, b]: Sturm-count bisection to absolute tolerance
/// 1e-10 on three nested grids, combined by Richardson extrapolation.
/// Cut points next to the window are nudged until every refinement level
/// agrees on the eigenvalue counts, which keeps indices aligned across
/// levels. Each eigenvalue must move by at most 1e-6 max(1, |lambda|)
/// between the two extrapolated refinement pairs, else SolverError.
Spectrum eigen_window(const DiscretizedOperator& op, double a, double b);

/// Exact count of eigenvalues in [a, b] (inclusive ends); [a, b] must lie
/// inside the spectrum's window.
int count_eigenvalues(const Spectrum& spec, double a, double b);

/// Phase-space volume of {(x, xi): a <= xi^2 + V(x) <= b}, one spatial
/// dimension, by quadrature of the xi-slice length 2(sqrt(b-V) - sqrt(a-V)).
/// Cross-resolution relative error lands in *rel_err when given and must
/// be <= 1e-3.
double liouville_volume(const Potential& pot, double a, double b,
                        double* rel_err = nullptr);

/// Surface measure d/dE of the volume below E, by central difference.
double liouville_surface(const Potential& pot, double E);

}  // namespace specprobe
