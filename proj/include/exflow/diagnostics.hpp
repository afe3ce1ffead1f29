#pragma once

#include <functional>
#include <string>
#include <vector>

#include "exflow/field.hpp"
#include "exflow/geometry.hpp"

namespace exflow {

class FlowSolver;
struct Trajectory;

/// Per-time conserved-quantity and residual measurements.
struct DiagnosticsRecord {
  double time = 0.0;
  double l1_mass = 0.0;      // sum |Gamma_j|
  double signed_mass = 0.0;  // sum Gamma_j
  double l2_norm = 0.0;      // grid-estimated ||omega||_2
  double linf_norm = 0.0;
  std::vector<double> circulations;  // weak gamma^i(u)
  std::vector<double> alpha;
  double tangency_residual = 0.0;
};

/// Weak circulation -int chi curl(u) - int u . grad_perp chi, with the blob
/// measure for the first term and midpoint quadrature on the cutoff band for
/// the second.
double weak_circulation(const std::function<Cx(Cx)>& u, const VortexBlobs& omega,
                        const Cutoff& chi, int cells_per_eps = 64);

struct DriftRow {
  std::string quantity;
  double initial = 0.0;
  double max_abs_drift = 0.0;
  double max_rel_drift = 0.0;  // relative to |initial| when nonzero, else absolute
};

/// Max drift of every recorded quantity from its initial value.
std::vector<DriftRow> conservation_report(const Trajectory& traj);

/// Deposits blobs on a grid with the uniform-core profile (each blob's mass
/// is deposited exactly) and returns the discrete Lq norm. q = inf is
/// accepted as q >= 1e9 or the dedicated overload value below.
double lq_norm_estimate(const VortexBlobs& blobs, double q, double h);
inline constexpr double kLqInfinity = 1e300;

/// Max over a fixed family of test functions h = chi^i * {1, x, y} of
/// |int u . grad h| / (||grad h|| ||u||), quadrature with subdivided cells at
/// the fluid boundary. Small iff u is weakly tangent and divergence free.
double tangency_residual(const std::function<Cx(Cx)>& u, const DomainApproximation& approx,
                         const std::vector<Cutoff>& cutoffs, int cells_per_eps = 48);

/// Divergence-free space-time test field phi = grad_perp of
/// bump(x; center, radius) * theta(t), with theta = 1 near t = 0 and falling
/// smoothly to 0 before t_end.
struct MomentumTestField {
  Cx center{0.0, 0.0};
  double radius = 1.0;
  double t_end = 1.0;

  double theta(double t) const;
  double theta_dot(double t) const;
  double bump(Cx x) const;       // C^3 compactly supported scalar
  Cx bump_gradient(Cx x) const;
  Cx phi(double t, Cx x) const;  // grad_perp bump * theta
  Cx phi_t(double t, Cx x) const;
  /// Spatial Jacobian of phi as (d1 phi1, d2 phi1, d1 phi2, d2 phi2).
  std::array<double, 4> phi_grad(double t, Cx x) const;
};

/// |int int (u . phi_t + (u x u) : grad phi) + int u0 . phi(0,.)| over the
/// trajectory, by space-time midpoint/trapezoid quadrature. The velocity at
/// snapshot times is reconstructed through the solver.
double momentum_residual(const Trajectory& traj, const FlowSolver& solver,
                         const MomentumTestField& phi, double grid_h = 0.05);

/// Grid estimate of the best constant C in ||phi|| <= C ||grad phi|| over
/// functions vanishing on the obstacle approximant, inside B(0, rho):
/// inverse square root of the smallest Dirichlet-on-obstacle eigenvalue.
double poincare_estimate(const JordanCurve& obstacle_curve, double rho, double h);

}  // namespace exflow
