#include "exflow/transport.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "exflow/diagnostics.hpp"
#include "exflow/scenario.hpp"

namespace exflow {

FlowSolver::FlowSolver() = default;

FlowSolver::FlowSolver(std::vector<SingularObstacle> obstacles, int n, std::vector<double> gamma,
                       Options opts)
    : obstacles_(std::move(obstacles)), gamma_(std::move(gamma)) {
  if (obstacles_.empty()) throw std::invalid_argument("exterior mode needs at least one obstacle");
  if (gamma_.size() != obstacles_.size())
    throw std::invalid_argument("gamma length must match the obstacle count");

  std::vector<JordanCurve> curves;
  curves.reserve(obstacles_.size());
  for (const auto& o : obstacles_)
    curves.push_back(approximation_sequence(o, n, opts.curve_points));
  approx_ = DomainApproximation(std::move(curves));

  auto maps = std::make_shared<std::vector<ExteriorMap>>();
  maps->reserve(approx_.curves.size());
  for (const auto& c : approx_.curves)
    maps->push_back(ExteriorMap::fit(c, opts.map_degree, opts.map_residual_tol));
  maps_ = maps;

  auto fields = std::make_shared<std::vector<HarmonicExpansion>>();
  fields->reserve(approx_.curves.size());
  for (std::size_t i = 0; i < approx_.curves.size(); ++i)
    fields->push_back(solve_harmonic_multi(approx_, static_cast<int>(i), maps_,
                                           opts.correction_degree));
  fields_ = fields;

  double eps = opts.cutoff_eps;
  const double offset = 1.0 / n;
  if (eps <= 0.0) {
    double min_sep = 1e300;
    for (std::size_t i = 0; i < obstacles_.size(); ++i)
      for (std::size_t j = i + 1; j < obstacles_.size(); ++j)
        min_sep = std::min(min_sep, obstacle_separation(obstacles_[i], obstacles_[j]));
    eps = std::min(0.5, 0.22 * min_sep);
    eps = std::max(eps, 2.0 * offset);
  }
  if (eps <= offset) {
    std::ostringstream os;
    os << "cutoff eps " << eps << " does not cover the approximant offset " << offset;
    throw std::invalid_argument(os.str());
  }
  for (const auto& o : obstacles_) cutoffs_.emplace_back(o, eps, obstacles_);
  for (const auto& o : obstacles_) diag_cutoffs_.emplace_back(o, 0.8 * eps, obstacles_);

  // Map values at the fixed quadrature nodes are blob independent, so they
  // are computed once here and reused every stage and every record.
  const std::size_t k = maps_->size();
  auto prepare = [&](const std::vector<Cutoff>& cuts, int cells,
                     std::vector<CutoffQuadrature>& quads, std::vector<std::vector<Cx>>& ws,
                     std::vector<std::vector<Cx>>& dws) {
    for (const auto& c : cuts) {
      quads.push_back(CutoffQuadrature::build(c, cells));
      const auto& nodes = quads.back().nodes;
      std::vector<Cx> w(nodes.size() * k), dw(nodes.size() * k);
      parallel_for(nodes.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t p = b; p < e; ++p)
          for (std::size_t l = 0; l < k; ++l) {
            w[p * k + l] = (*maps_)[l].evaluate(nodes[p]);
            dw[p * k + l] = (*maps_)[l].derivative(nodes[p]);
          }
      });
      ws.push_back(std::move(w));
      dws.push_back(std::move(dw));
    }
  };
  prepare(cutoffs_, opts.alpha_cells_per_eps, alpha_quads_, quad_w_, quad_dw_);
  prepare(diag_cutoffs_, opts.diag_cells_per_eps, diag_quads_, diag_w_, diag_dw_);

  correction_.emplace(approx_, maps_, opts.correction_degree);
}

std::vector<double> FlowSolver::weak_circulations(const StreamDecomposition& decomp,
                                                  const VortexBlobs& blobs) const {
  const std::size_t k = diag_cutoffs_.size();
  std::vector<double> circ(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    double c = 0.0;
    for (std::size_t j = 0; j < blobs.size(); ++j)
      if (blobs.strengths[j] != 0.0)
        c -= blobs.strengths[j] * diag_cutoffs_[i](blobs.positions[j]);
    const auto& q = diag_quads_[i];
    const auto& w = diag_w_[i];
    const auto& dw = diag_dw_[i];
    const bool with_corr = !decomp.correction.empty();
    std::vector<double> partial(q.nodes.size());
    parallel_for(q.nodes.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t p = b; p < e; ++p) {
        Cx g = kernel_grad_prepared(w[p * k], dw[p * k], decomp.images, blobs.strengths);
        if (with_corr) g += decomp.correction.gradient_prepared(&w[p * k], &dw[p * k]);
        for (std::size_t l = 0; l < decomp.alpha.size(); ++l)
          if (decomp.alpha[l] != 0.0)
            g += decomp.alpha[l] * (*fields_)[l].gradient_prepared(&w[p * k], &dw[p * k]);
        // u . grad-perp chi with u = perp(g) equals g . grad chi
        partial[p] = g.real() * q.grad_chi[p].real() + g.imag() * q.grad_chi[p].imag();
      }
    });
    double flux = 0.0;
    for (double v : partial) flux += v;
    circ[i] = c - flux * q.cell_area;
  }
  return circ;
}

std::vector<double> FlowSolver::alpha_prepared(const StreamDecomposition& decomp,
                                               const VortexBlobs& blobs) const {
  const std::size_t k = cutoffs_.size();
  std::vector<double> alpha(k, 0.0);
  bool any_strength = false;
  for (double g : blobs.strengths) any_strength = any_strength || g != 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double circ = 0.0;
    if (any_strength) {
      for (std::size_t j = 0; j < blobs.size(); ++j)
        if (blobs.strengths[j] != 0.0)
          circ -= blobs.strengths[j] * cutoffs_[i](blobs.positions[j]);
      const auto& q = alpha_quads_[i];
      const auto& w = quad_w_[i];
      const auto& dw = quad_dw_[i];
      const bool with_corr = !decomp.correction.empty();
      std::vector<double> partial(q.nodes.size());
      parallel_for(q.nodes.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t p = b; p < e; ++p) {
          Cx g = kernel_grad_prepared(w[p * k], dw[p * k], decomp.images, blobs.strengths);
          if (with_corr)
            g += decomp.correction.gradient_prepared(&w[p * k], &dw[p * k]);
          partial[p] = g.real() * q.grad_chi[p].real() + g.imag() * q.grad_chi[p].imag();
        }
      });
      double flux = 0.0;
      for (double v : partial) flux += v;
      circ -= flux * q.cell_area;
    }
    alpha[i] = gamma_[i] - circ;
  }
  return alpha;
}

bool FlowSolver::exterior(Cx x) const {
  if (free_plane()) return true;
  return approx_.exterior_point(x);
}

StreamDecomposition FlowSolver::decompose(const VortexBlobs& blobs) const {
  StreamDecomposition d;
  if (free_plane()) return d;
  d.maps = maps_;
  d.harmonic_fields = fields_;
  d.gamma = gamma_;
  d.images = KernelImages::build(maps_->front(), blobs);
  d.correction = correction_->solve(d.images, blobs.strengths);
  d.alpha = alpha_prepared(d, blobs);
  return d;
}

Cx FlowSolver::velocity_at(const StreamDecomposition& decomp, const VortexBlobs& blobs,
                           Cx x) const {
  if (free_plane()) return fullplane_biot_savart(blobs, x);
  return velocity_unchecked(decomp, blobs, x);
}

std::vector<Cx> FlowSolver::blob_velocities(const StreamDecomposition& decomp,
                                            const VortexBlobs& blobs) const {
  std::vector<Cx> u(blobs.size());
  parallel_for(blobs.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t j = b; j < e; ++j) u[j] = velocity_at(decomp, blobs, blobs.positions[j]);
  });
  return u;
}

SimulationState make_state(std::shared_ptr<const FlowSolver> solver, VortexBlobs blobs,
                           double dt) {
  SimulationState s;
  s.solver = std::move(solver);
  for (const Cx& p : blobs.positions)
    if (!s.solver->exterior(p))
      throw std::invalid_argument("initial blob position inside an obstacle");
  s.blobs = std::move(blobs);
  s.decomp = s.solver->decompose(s.blobs);
  s.dt = dt;
  return s;
}

namespace {

// One RK4 attempt at step size h; returns false if any stage or the result
// puts a blob inside an obstacle. offending reports the first such blob.
bool rk4_attempt(const FlowSolver& solver, const VortexBlobs& blobs, double h,
                 std::vector<Cx>& out_positions, std::size_t& offending) {
  const std::size_t n = blobs.size();
  VortexBlobs stage = blobs;
  auto check = [&](const std::vector<Cx>& pos) {
    for (std::size_t j = 0; j < pos.size(); ++j) {
      if (!solver.exterior(pos[j])) {
        offending = j;
        return false;
      }
    }
    return true;
  };

  StreamDecomposition d1 = solver.decompose(blobs);
  const std::vector<Cx> k1 = solver.blob_velocities(d1, blobs);

  for (std::size_t j = 0; j < n; ++j)
    stage.positions[j] = blobs.positions[j] + 0.5 * h * k1[j];
  if (!check(stage.positions)) return false;
  stage.time = blobs.time + 0.5 * h;
  StreamDecomposition d2 = solver.decompose(stage);
  const std::vector<Cx> k2 = solver.blob_velocities(d2, stage);

  for (std::size_t j = 0; j < n; ++j)
    stage.positions[j] = blobs.positions[j] + 0.5 * h * k2[j];
  if (!check(stage.positions)) return false;
  StreamDecomposition d3 = solver.decompose(stage);
  const std::vector<Cx> k3 = solver.blob_velocities(d3, stage);

  for (std::size_t j = 0; j < n; ++j)
    stage.positions[j] = blobs.positions[j] + h * k3[j];
  if (!check(stage.positions)) return false;
  stage.time = blobs.time + h;
  StreamDecomposition d4 = solver.decompose(stage);
  const std::vector<Cx> k4 = solver.blob_velocities(d4, stage);

  out_positions.resize(n);
  for (std::size_t j = 0; j < n; ++j)
    out_positions[j] =
        blobs.positions[j] + (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
  return check(out_positions);
}

}  // namespace

SimulationState step(const SimulationState& state) {
  if (state.dt == 0.0) throw std::invalid_argument("step size must be nonzero");
  double h = state.dt;
  std::vector<Cx> next;
  std::size_t offending = 0;
  for (int halving = 0; halving <= 6; ++halving) {
    if (rk4_attempt(*state.solver, state.blobs, h, next, offending)) {
      SimulationState out;
      out.solver = state.solver;
      out.blobs = state.blobs;
      out.blobs.positions = std::move(next);
      out.blobs.time = state.blobs.time + h;
      out.decomp = state.solver->decompose(out.blobs);
      out.step_index = state.step_index + 1;
      out.dt = state.dt;
      return out;
    }
    h *= 0.5;
  }
  std::ostringstream os;
  os << "blob-boundary collision: blob " << offending << " cannot be advanced at t = "
     << state.blobs.time << " even after 6 step halvings";
  throw std::runtime_error(os.str());
}

// ---------------------------------------------------------------------------
// simulate

namespace {

DiagnosticsRecord diagnose(const FlowSolver& solver, const SimulationState& s,
                           const Scenario& sc) {
  DiagnosticsRecord rec;
  rec.time = s.blobs.time;
  rec.l1_mass = s.blobs.l1_strength();
  rec.signed_mass = s.blobs.total_strength();
  if (s.blobs.size() > 0) {
    const double h = std::min(sc.grid_h, 0.5 * s.blobs.core);
    rec.l2_norm = lq_norm_estimate(s.blobs, 2.0, h);
    rec.linf_norm = lq_norm_estimate(s.blobs, kLqInfinity, h);
  }
  rec.alpha = s.decomp.alpha;
  if (!solver.free_plane()) {
    rec.circulations = solver.weak_circulations(s.decomp, s.blobs);
    auto u = [&](Cx x) { return velocity_unchecked(s.decomp, s.blobs, x); };
    rec.tangency_residual =
        tangency_residual(u, solver.approximation(), solver.cutoffs(), sc.diag_cells_per_eps / 2);
  }
  return rec;
}

}  // namespace

Trajectory simulate(const Scenario& sc) {
  sc.validate();
  std::shared_ptr<const FlowSolver> solver;
  if (sc.mode == "free-plane") {
    solver = std::make_shared<FlowSolver>();
  } else {
    FlowSolver::Options opts;
    opts.map_degree = sc.collocation_degree;
    opts.map_residual_tol = sc.map_residual;
    opts.correction_degree = sc.correction_degree;
    opts.cutoff_eps = sc.cutoff_eps;
    opts.alpha_cells_per_eps = sc.alpha_cells_per_eps;
    opts.diag_cells_per_eps = sc.diag_cells_per_eps;
    solver = std::make_shared<FlowSolver>(sc.obstacles, sc.approximation_index, sc.gamma, opts);
  }

  SimulationState state = make_state(solver, sc.make_blobs(), sc.dt);
  Trajectory traj;
  traj.solver = solver;
  auto record = [&]() {
    traj.times.push_back(state.blobs.time);
    traj.snapshots.push_back(state.blobs);
    traj.diagnostics.push_back(diagnose(*solver, state, sc));
  };
  record();

  const int nsteps = static_cast<int>(std::llround(sc.t_final / sc.dt));
  for (int i = 0; i < nsteps; ++i) {
    state = step(state);
    if ((i + 1) % sc.diagnostics_cadence == 0 || i + 1 == nsteps) record();
  }
  return traj;
}

}  // namespace exflow
