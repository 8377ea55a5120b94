#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "specprobe/common.hpp"
#include "specprobe/potential.hpp"

namespace specprobe {

/// Point z = (x, xi) of phase space.
struct PhasePoint {
    Eigen::VectorXd x;
    Eigen::VectorXd xi;
};

/// Hamiltonian vector field of p = |xi|^2 + V: returns (2 xi, -grad V)
/// stacked into a 2n-vector.
Eigen::VectorXd hamiltonian_field(const Potential& pot, const PhasePoint& z);

/// Trajectory (and optionally monodromy) samples of the flow.
/// Invariants the integrator is built to satisfy, and tests enforce:
/// energy drift <= 1e-8 (1 + |p(z0)|) and det(monodromy) = 1 within 1e-6.
struct FlowResult {
    std::vector<double> times;
    std::vector<PhasePoint> states;
    std::vector<Eigen::MatrixXd> monodromies;  // empty unless requested
    double dt = 0.0;
    bool truncated = false;  // trajectory left the confinement box
};

/// Stoermer-Verlet integration of the flow from z0 to t_end. The scheme is
/// symplectic, so det(monodromy) = 1 holds to round-off and the energy
/// error stays bounded instead of drifting. dt = 0 selects a step from the
/// local curvature that keeps the energy wobble below 1e-8 relative; a
/// user-provided dt must stay under one thousandth of the local period
/// scale. The variational system is integrated with the same shear updates.
FlowResult integrate_flow(const Potential& pot, const PhasePoint& z0,
                          double t_end, bool with_monodromy = false,
                          double dt = 0.0, int max_samples = 2001);

/// Lower bound for periods of closed orbits with energy in [e_lo, e_hi]:
/// T = 2 pi / max(2, b) with b the grid supremum of the Hessian spectral
/// norm over the accessible region {V <= e_hi}.
struct PeriodBound {
    double value = 0.0;         // the bound T
    double lipschitz = 0.0;     // a = max(2, b)
    double grid_spacing = 0.0;  // spacing of the supremum grid
};
PeriodBound period_lower_bound(const Potential& pot, double e_lo, double e_hi);

/// Smallest first-return time over seeded orbits on the energy surface E
/// (section xi = 0, crossings from negative to positive xi). One spatial
/// dimension only. Returns nothing when no closed orbit is found (empty
/// surface, or only asymptotic orbits within the time budget).
std::optional<double> minimal_period_search(const Potential& pot, double E);

/// |det(dPhi_t(z0) - Id)|^{-1/2} at an equilibrium z0, with dPhi_t from
/// the variational equations (Verlet plus one Richardson level, so the
/// 1e-6 closed-form agreement is a real property of the integrator).
/// Throws SolverError when |det| < 1e-12 (t is a period of the
/// linearized flow).
double dgu_density(const Potential& pot, const PhasePoint& z0, double t);

/// One factor of the closed-form density: angular rate alpha, elliptic
/// (sin, positive Hessian direction) or hyperbolic (sinh, negative).
struct AlphaFactor {
    double alpha = 0.0;
    bool elliptic = true;
};

/// 1 / |prod sin(alpha_j t) * prod sinh(alpha_j t)|.
/// Throws SolverError on a vanishing factor.
double closed_form_density(const std::vector<AlphaFactor>& alphas, double t);

/// Frozen reparametrization between the closed form and dgu_density for
/// quadratic models, calibrated once on V = x^2 and kept fixed: a Hessian
/// eigenvalue mu maps to alpha = sqrt(|mu| / 2) (elliptic when mu > 0),
/// and the closed form is multiplied by 2^{-n}:
///   dgu_density(t) = dgu_prefactor(n) * closed_form_density(factors, t).
std::vector<AlphaFactor> dgu_factors_from_hessian(const Eigen::VectorXd& mu);
double dgu_prefactor(int n);

/// Quadratic-model propagator oracle: amplitude prod_k sqrt(w_k / (2 i pi
/// sin(w_k t))) and action S = sum_k (w_k / sin(w_k t)) * (cos(w_k t)
/// (x_k^2 + y_k^2) / 2 - x_k y_k). Purely analytic reference.
struct MehlerKernel {
    Complex amplitude;
    double action = 0.0;
};
MehlerKernel mehler_kernel(const std::vector<double>& w, double t,
                           const Eigen::VectorXd& x, const Eigen::VectorXd& y);

}  // namespace specprobe
