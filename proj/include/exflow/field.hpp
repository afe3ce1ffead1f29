#pragma once

#include <memory>
#include <vector>

#include "exflow/common.hpp"
#include "exflow/conformal.hpp"
#include "exflow/geometry.hpp"

namespace exflow {

/// Lagrangian discretization of the vorticity.
struct VortexBlobs {
  std::vector<Cx> positions;
  std::vector<double> strengths;
  double core = 0.05;  // blob radius
  double time = 0.0;

  std::size_t size() const { return positions.size(); }
  double total_strength() const;
  double l1_strength() const;
};

/// Harmonic stream function built on the fitted maps: per-obstacle logarithm
/// carriers (1/2pi) ln|T_j| with strengths d_j, decaying Laurent corrections
/// in T_j^-m, and an additive constant. Exactly harmonic; the circulation of
/// its perpendicular gradient around obstacle j is d_j.
struct HarmonicExpansion {
  std::shared_ptr<const std::vector<ExteriorMap>> maps;
  std::vector<double> log_strengths;      // d_j per obstacle
  std::vector<std::vector<Cx>> coeffs;    // per obstacle, m = 1..degree
  double constant = 0.0;
  int owner = -1;                          // obstacle index for psi^i, -1 for corrections
  std::vector<double> boundary_constants;  // C^{i,j} attained on each boundary
  double fit_residual = 0.0;

  double value(Cx x) const;
  /// Real gradient encoded as gx + i gy.
  Cx gradient(Cx x) const;
  /// Gradient from precomputed map values at one point: w[l] = T_l(x),
  /// dw[l] = T_l'(x). Used on fixed quadrature grids.
  Cx gradient_prepared(const Cx* w, const Cx* dw) const;
  bool empty() const;
};

/// Blob images under the kernel map (obstacle 1), cached per decomposition.
struct KernelImages {
  std::vector<Cx> w;        // T(x_j)
  std::vector<Cx> w_star;   // T(x_j) / |T(x_j)|^2
  std::vector<double> rho2; // squared mapped core radii
  std::vector<double> log_abs_w;

  static KernelImages build(const ExteriorMap& map, const VortexBlobs& blobs);
};

/// Stream value of the single-obstacle image kernel at x, desingularized with
/// the mapped-core rule.
double kernel_psi0_single(const ExteriorMap& map, const VortexBlobs& blobs, Cx x);
/// Real gradient (gx + i gy) of the same kernel. The direct term of a blob
/// vanishes at its own center, so blob self-induction needs no special case.
Cx kernel_grad_single(const ExteriorMap& map, const VortexBlobs& blobs, Cx x);

/// Cached variants used in the hot paths.
double kernel_psi0_cached(const ExteriorMap& map, const KernelImages& img,
                          const std::vector<double>& strengths, Cx x);
Cx kernel_grad_cached(const ExteriorMap& map, const KernelImages& img,
                      const std::vector<double>& strengths, Cx x);
/// Kernel gradient from precomputed map values w = T(x), dw = T'(x).
Cx kernel_grad_prepared(Cx w, Cx dw, const KernelImages& img,
                        const std::vector<double>& strengths);

/// (1/2pi) ln |T(x)|: the unit-circulation harmonic stream of one obstacle.
double harmonic_psi_single(const ExteriorMap& map, Cx x);
Cx harmonic_grad_single(const ExteriorMap& map, Cx x);

/// Harmonic field psi^i: zero on its own boundary, constant on the others,
/// circulation delta_ij, log growth (1/2pi) ln|x| + O(1).
HarmonicExpansion solve_harmonic_multi(const DomainApproximation& approx, int i,
                                       std::shared_ptr<const std::vector<ExteriorMap>> maps,
                                       int degree = 24);

/// Multi-obstacle correction: harmonic, O(1) at infinity, matching
/// -psi0_kernel on every boundary curve in least squares. Zero field for a
/// single obstacle.
HarmonicExpansion solve_correction_multi(const DomainApproximation& approx,
                                         std::shared_ptr<const std::vector<ExteriorMap>> maps,
                                         const VortexBlobs& blobs, int degree = 24);

/// Same solve with the collocation matrix factored once per geometry.
class CorrectionSolver {
 public:
  CorrectionSolver(const DomainApproximation& approx,
                   std::shared_ptr<const std::vector<ExteriorMap>> maps, int degree = 24);
  ~CorrectionSolver();
  CorrectionSolver(CorrectionSolver&&) noexcept;
  CorrectionSolver& operator=(CorrectionSolver&&) noexcept;

  HarmonicExpansion solve(const VortexBlobs& blobs) const;
  HarmonicExpansion solve(const KernelImages& images, const std::vector<double>& strengths) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Midpoint quadrature nodes on the support band of grad(chi^i).
struct CutoffQuadrature {
  std::vector<Cx> nodes;
  std::vector<Cx> grad_chi;
  double cell_area = 0.0;

  static CutoffQuadrature build(const Cutoff& cutoff, int cells_per_eps);
};

/// The full velocity representation u = grad-perp psi0 + sum_i alpha_i
/// grad-perp psi^i with psi0 = image kernel through map 1 plus correction.
struct StreamDecomposition {
  std::shared_ptr<const std::vector<ExteriorMap>> maps;
  std::shared_ptr<const std::vector<HarmonicExpansion>> harmonic_fields;
  HarmonicExpansion correction;
  std::vector<double> gamma;
  std::vector<double> alpha;
  KernelImages images;

  std::size_t obstacle_count() const { return maps ? maps->size() : 0; }
  double psi0_value(const VortexBlobs& blobs, Cx x) const;
  Cx psi0_gradient(const VortexBlobs& blobs, Cx x) const;
  double stream_value(const VortexBlobs& blobs, Cx x) const;
};

/// alpha_i = gamma_i minus the weak boundary circulation of grad-perp psi0,
/// evaluated as -sum_j Gamma_j chi^i(x_j) - integral of grad psi0 . grad chi^i.
std::vector<double> compute_alpha(const StreamDecomposition& decomp, const VortexBlobs& blobs,
                                  const std::vector<Cutoff>& cutoffs,
                                  const std::vector<CutoffQuadrature>& quads);
/// Convenience overload building midpoint quadratures at the given resolution.
std::vector<double> compute_alpha(const StreamDecomposition& decomp, const VortexBlobs& blobs,
                                  const std::vector<Cutoff>& cutoffs, int cells_per_eps = 16);

/// Velocity at an exterior point (validated against every obstacle).
Cx velocity(const StreamDecomposition& decomp, const VortexBlobs& blobs, Cx x);
/// Hot-path variant without the exterior check.
Cx velocity_unchecked(const StreamDecomposition& decomp, const VortexBlobs& blobs, Cx x);

/// Desingularized free-plane Biot-Savart sum.
Cx fullplane_biot_savart(const VortexBlobs& blobs, Cx x);

}  // namespace exflow
