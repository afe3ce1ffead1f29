#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "exflow/field.hpp"
#include "exflow/geometry.hpp"

namespace exflow {

struct DiagnosticsRecord;  // diagnostics.hpp
struct Scenario;           // scenario.hpp

/// Everything that is fixed for a given geometry: approximants, maps,
/// harmonic fields, cutoffs and the prefactored correction solver. Holds no
/// per-step state; decompose() produces the blob-dependent pieces.
struct FlowSolverOptions {
  int map_degree = 64;
  double map_residual_tol = 1e-6;
  int correction_degree = 24;
  double cutoff_eps = 0.0;  // 0: choose from the geometry
  int alpha_cells_per_eps = 16;
  int diag_cells_per_eps = 64;
  int curve_points = 256;
};

class FlowSolver {
 public:
  using Options = FlowSolverOptions;

  /// Exterior mode: builds curves at index n, fits maps, solves psi^i.
  FlowSolver(std::vector<SingularObstacle> obstacles, int n, std::vector<double> gamma,
             Options opts = {});
  /// Free-plane mode (no obstacles).
  FlowSolver();

  bool free_plane() const { return maps_ == nullptr; }
  std::size_t obstacle_count() const { return maps_ ? maps_->size() : 0; }
  const DomainApproximation& approximation() const { return approx_; }
  const std::vector<ExteriorMap>& maps() const { return *maps_; }
  std::shared_ptr<const std::vector<ExteriorMap>> maps_ptr() const { return maps_; }
  const std::vector<HarmonicExpansion>& harmonic_fields() const { return *fields_; }
  const std::vector<Cutoff>& cutoffs() const { return cutoffs_; }
  const std::vector<SingularObstacle>& obstacles() const { return obstacles_; }
  const std::vector<double>& gamma() const { return gamma_; }

  /// Correction + alpha for the given blob population.
  StreamDecomposition decompose(const VortexBlobs& blobs) const;
  /// Weak circulations of the full velocity field, measured with independent
  /// (narrower, finer) cutoffs than the ones alpha is computed from.
  std::vector<double> weak_circulations(const StreamDecomposition& decomp,
                                        const VortexBlobs& blobs) const;
  /// Velocities at all blob positions, data parallel, deterministic.
  std::vector<Cx> blob_velocities(const StreamDecomposition& decomp,
                                  const VortexBlobs& blobs) const;
  Cx velocity_at(const StreamDecomposition& decomp, const VortexBlobs& blobs, Cx x) const;
  bool exterior(Cx x) const;

 private:
  std::vector<SingularObstacle> obstacles_;
  DomainApproximation approx_;
  std::shared_ptr<const std::vector<ExteriorMap>> maps_;
  std::shared_ptr<const std::vector<HarmonicExpansion>> fields_;
  std::vector<Cutoff> cutoffs_;
  std::vector<CutoffQuadrature> alpha_quads_;
  std::vector<Cutoff> diag_cutoffs_;
  std::vector<CutoffQuadrature> diag_quads_;
  // map values at the quadrature nodes, layout [node * k + obstacle]
  std::vector<std::vector<Cx>> quad_w_, quad_dw_;
  std::vector<std::vector<Cx>> diag_w_, diag_dw_;
  std::optional<CorrectionSolver> correction_;
  std::vector<double> gamma_;

  std::vector<double> alpha_prepared(const StreamDecomposition& decomp,
                                     const VortexBlobs& blobs) const;
};

struct SimulationState {
  std::shared_ptr<const FlowSolver> solver;
  VortexBlobs blobs;
  StreamDecomposition decomp;
  int step_index = 0;
  double dt = 0.01;
};

SimulationState make_state(std::shared_ptr<const FlowSolver> solver, VortexBlobs blobs, double dt);

/// One RK4 step. Strengths are transported unchanged; alpha and the
/// correction are recomputed at every stage. If any stage lands a blob inside
/// an obstacle the step is retried at half the step size, up to 6 halvings.
/// dt may be negative (time reversal); dt = 0 is an error.
SimulationState step(const SimulationState& state);

struct Trajectory {
  std::vector<double> times;
  std::vector<VortexBlobs> snapshots;
  std::vector<DiagnosticsRecord> diagnostics;
  std::shared_ptr<const FlowSolver> solver;
};

Trajectory simulate(const Scenario& scenario);

}  // namespace exflow
