#include "exflow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "exflow/transport.hpp"

namespace exflow {

namespace {
inline double dot(Cx a, Cx b) { return a.real() * b.real() + a.imag() * b.imag(); }
}  // namespace

// ---------------------------------------------------------------------------
// weak_circulation

double weak_circulation(const std::function<Cx(Cx)>& u, const VortexBlobs& omega,
                        const Cutoff& chi, int cells_per_eps) {
  const CutoffQuadrature q = CutoffQuadrature::build(chi, cells_per_eps);
  double circ = 0.0;
  for (std::size_t j = 0; j < omega.size(); ++j)
    if (omega.strengths[j] != 0.0) circ -= omega.strengths[j] * chi(omega.positions[j]);
  std::vector<double> partial(q.nodes.size());
  parallel_for(q.nodes.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) partial[p] = dot(u(q.nodes[p]), perp(q.grad_chi[p]));
  });
  double flux = 0.0;
  for (double v : partial) flux += v;
  return circ - flux * q.cell_area;
}

// ---------------------------------------------------------------------------
// conservation_report

std::vector<DriftRow> conservation_report(const Trajectory& traj) {
  if (traj.diagnostics.size() < 2)
    throw std::invalid_argument("conservation_report needs at least two records");
  const DiagnosticsRecord& first = traj.diagnostics.front();

  std::vector<DriftRow> rows;
  auto add = [&](const std::string& name, auto getter) {
    DriftRow r;
    r.quantity = name;
    r.initial = getter(first);
    for (const auto& rec : traj.diagnostics) {
      const double d = std::abs(getter(rec) - r.initial);
      r.max_abs_drift = std::max(r.max_abs_drift, d);
    }
    r.max_rel_drift = std::abs(r.initial) > 1e-12 ? r.max_abs_drift / std::abs(r.initial)
                                                  : r.max_abs_drift;
    rows.push_back(r);
  };

  add("l1_mass", [](const DiagnosticsRecord& r) { return r.l1_mass; });
  add("signed_mass", [](const DiagnosticsRecord& r) { return r.signed_mass; });
  add("l2_norm", [](const DiagnosticsRecord& r) { return r.l2_norm; });
  add("linf_norm", [](const DiagnosticsRecord& r) { return r.linf_norm; });
  for (std::size_t i = 0; i < first.circulations.size(); ++i)
    add("circ_" + std::to_string(i + 1),
        [i](const DiagnosticsRecord& r) { return r.circulations[i]; });
  for (std::size_t i = 0; i < first.alpha.size(); ++i)
    add("alpha_" + std::to_string(i + 1), [i](const DiagnosticsRecord& r) { return r.alpha[i]; });
  return rows;
}

// ---------------------------------------------------------------------------
// lq_norm_estimate

double lq_norm_estimate(const VortexBlobs& blobs, double q, double h) {
  if (q < 1.0) throw std::invalid_argument("lq_norm_estimate requires q >= 1");
  if (blobs.size() == 0) return 0.0;
  if (h > 0.5 * blobs.core + 1e-15)
    throw std::invalid_argument("deposition grid too coarse: need h <= core/2");

  const double eps = blobs.core;
  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  for (const Cx& p : blobs.positions) {
    lo_x = std::min(lo_x, p.real());
    hi_x = std::max(hi_x, p.real());
    lo_y = std::min(lo_y, p.imag());
    hi_y = std::max(hi_y, p.imag());
  }
  lo_x -= eps + h;
  lo_y -= eps + h;
  hi_x += eps + h;
  hi_y += eps + h;
  const int nx = static_cast<int>(std::ceil((hi_x - lo_x) / h)) + 1;
  const int ny = static_cast<int>(std::ceil((hi_y - lo_y) / h)) + 1;
  std::vector<double> density(static_cast<std::size_t>(nx) * ny, 0.0);

  // Uniform-core deposition; subcell sampling,每 blob normalized so its whole
  // strength lands on the grid.
  const int sub = 4;
  for (std::size_t j = 0; j < blobs.size(); ++j) {
    const Cx c = blobs.positions[j];
    const int i0 = std::max(0, static_cast<int>((c.real() - eps - lo_x) / h) - 1);
    const int i1 = std::min(nx - 1, static_cast<int>((c.real() + eps - lo_x) / h) + 1);
    const int j0 = std::max(0, static_cast<int>((c.imag() - eps - lo_y) / h) - 1);
    const int j1 = std::min(ny - 1, static_cast<int>((c.imag() + eps - lo_y) / h) + 1);
    std::vector<std::pair<std::size_t, double>> frac;
    double total = 0.0;
    for (int jj = j0; jj <= j1; ++jj) {
      for (int ii = i0; ii <= i1; ++ii) {
        int hits = 0;
        for (int sy = 0; sy < sub; ++sy)
          for (int sx = 0; sx < sub; ++sx) {
            const Cx p(lo_x + (ii + (sx + 0.5) / sub) * h, lo_y + (jj + (sy + 0.5) / sub) * h);
            if (abs2(p - c) <= eps * eps) ++hits;
          }
        if (hits > 0) {
          const double f = static_cast<double>(hits) / (sub * sub);
          frac.emplace_back(static_cast<std::size_t>(jj) * nx + ii, f);
          total += f;
        }
      }
    }
    if (total <= 0.0) continue;
    const double per_area = blobs.strengths[j] / (total * h * h);
    for (const auto& [idx, f] : frac) density[idx] += per_area * f;
  }

  if (q >= kLqInfinity) {
    double mx = 0.0;
    for (double d : density) mx = std::max(mx, std::abs(d));
    return mx;
  }
  double acc = 0.0;
  for (double d : density)
    if (d != 0.0) acc += std::pow(std::abs(d), q);
  return std::pow(acc * h * h, 1.0 / q);
}

// ---------------------------------------------------------------------------
// tangency_residual

namespace {

// Quadrature nodes over the fluid part of the 2*eps neighborhood of one
// obstacle, with quadtree subdivision of cells that straddle the curve.
void tangency_nodes(const SingularObstacle& obs, const DomainApproximation& approx,
                    double eps, double h, std::vector<Cx>& nodes, std::vector<double>& weights) {
  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  for (const Cx& p : obs.samples) {
    lo_x = std::min(lo_x, p.real());
    hi_x = std::max(hi_x, p.real());
    lo_y = std::min(lo_y, p.imag());
    hi_y = std::max(hi_y, p.imag());
  }
  lo_x -= 2.0 * eps + h;
  lo_y -= 2.0 * eps + h;
  hi_x += 2.0 * eps + h;
  hi_y += 2.0 * eps + h;
  const int nx = static_cast<int>(std::ceil((hi_x - lo_x) / h));
  const int ny = static_cast<int>(std::ceil((hi_y - lo_y) / h));

  // Curves hug their obstacles within the offset distance, so only cells with
  // obstacle distance near the offset can straddle the fluid boundary; those
  // are integrated on a subdivided grid.
  double offset = 0.0;
  for (const auto& c : approx.curves)
    if (c.n_index > 0) offset = std::max(offset, 1.0 / c.n_index);
  if (offset == 0.0) offset = 2.0 * h;

  std::function<void(Cx, double, int)> refine = [&](Cx center, double size, int depth) {
    const double diag = 0.75 * size;
    const double d = obs.distance(center);
    const bool ambiguous = d - diag < offset && d + diag > 0.2 * offset;
    if (!ambiguous || depth >= 3) {
      if (approx.exterior_point(center)) {
        nodes.push_back(center);
        weights.push_back(size * size);
      }
      return;
    }
    const double s2 = 0.5 * size;
    refine(center + Cx(-0.25 * size, -0.25 * size), s2, depth + 1);
    refine(center + Cx(0.25 * size, -0.25 * size), s2, depth + 1);
    refine(center + Cx(-0.25 * size, 0.25 * size), s2, depth + 1);
    refine(center + Cx(0.25 * size, 0.25 * size), s2, depth + 1);
  };

  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Cx c(lo_x + (i + 0.5) * h, lo_y + (j + 0.5) * h);
      const double d = obs.distance(c);
      if (d >= 2.0 * eps) continue;
      if (d > offset + h) {
        if (approx.exterior_point(c)) {  // another obstacle could still overlap
          nodes.push_back(c);
          weights.push_back(h * h);
        }
        continue;
      }
      refine(c, h, 0);
    }
  }
}

}  // namespace

double tangency_residual(const std::function<Cx(Cx)>& u, const DomainApproximation& approx,
                         const std::vector<Cutoff>& cutoffs, int cells_per_eps) {
  if (cells_per_eps < 4) throw std::invalid_argument("tangency quadrature grid unresolved");
  double worst = 0.0;
  for (const auto& cut : cutoffs) {
    const SingularObstacle& obs = cut.obstacle();
    const double eps = cut.eps();
    const double h = eps / cells_per_eps;
    std::vector<Cx> nodes;
    std::vector<double> weights;
    tangency_nodes(obs, approx, eps, h, nodes, weights);

    std::vector<Cx> uval(nodes.size());
    parallel_for(nodes.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t p = b; p < e; ++p) uval[p] = u(nodes[p]);
    });

    // Test family: chi * {1, xhat, yhat} with coordinates centered on the
    // obstacle and scaled by its size.
    Cx c0(0, 0);
    for (const Cx& p : obs.samples) c0 += p;
    c0 /= static_cast<double>(obs.samples.size());
    const double scale = 0.5 * obs.diameter() + 2.0 * eps;

    for (int t = 0; t < 3; ++t) {
      double num = 0.0, den_g = 0.0, den_u = 0.0;
      for (std::size_t p = 0; p < nodes.size(); ++p) {
        const Cx x = nodes[p];
        const double chi = cut(x);
        const Cx gchi = cut.gradient(x);
        double poly = 1.0;
        Cx gpoly(0, 0);
        if (t == 1) {
          poly = (x.real() - c0.real()) / scale;
          gpoly = Cx(1.0 / scale, 0.0);
        } else if (t == 2) {
          poly = (x.imag() - c0.imag()) / scale;
          gpoly = Cx(0.0, 1.0 / scale);
        }
        const Cx gh = chi * gpoly + poly * gchi;
        if (gh == Cx(0, 0)) continue;
        num += weights[p] * dot(uval[p], gh);
        den_g += weights[p] * abs2(gh);
        den_u += weights[p] * abs2(uval[p]);
      }
      const double den = std::sqrt(den_g) * std::sqrt(den_u);
      if (den > 1e-14) worst = std::max(worst, std::abs(num) / den);
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// momentum_residual

double MomentumTestField::theta(double t) const {
  const double t1 = 0.5 * t_end;
  if (t <= t1) return 1.0;
  if (t >= t_end) return 0.0;
  const double s = (t - t1) / (t_end - t1);
  return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

double MomentumTestField::theta_dot(double t) const {
  const double t1 = 0.5 * t_end;
  if (t <= t1 || t >= t_end) return 0.0;
  const double s = (t - t1) / (t_end - t1);
  return -30.0 * s * s * (1.0 - s) * (1.0 - s) / (t_end - t1);
}

double MomentumTestField::bump(Cx x) const {
  const double s = abs2(x - center) / (radius * radius);
  if (s >= 1.0) return 0.0;
  const double w = 1.0 - s;
  return w * w * w * w;
}

Cx MomentumTestField::bump_gradient(Cx x) const {
  const double s = abs2(x - center) / (radius * radius);
  if (s >= 1.0) return Cx(0, 0);
  const double w = 1.0 - s;
  return (-8.0 / (radius * radius)) * w * w * w * (x - center);
}

Cx MomentumTestField::phi(double t, Cx x) const { return theta(t) * perp(bump_gradient(x)); }

Cx MomentumTestField::phi_t(double t, Cx x) const { return theta_dot(t) * perp(bump_gradient(x)); }

std::array<double, 4> MomentumTestField::phi_grad(double t, Cx x) const {
  const double r2 = radius * radius;
  const double s = abs2(x - center) / r2;
  if (s >= 1.0) return {0, 0, 0, 0};
  const double w = 1.0 - s;
  const Cx d = x - center;
  // Hessian of the bump: -(8/r2) [w^3 I - (6/r2) w^2 d (x) d]
  const double a = -8.0 / r2;
  const double bxx = a * (w * w * w - 6.0 / r2 * w * w * d.real() * d.real());
  const double byy = a * (w * w * w - 6.0 / r2 * w * w * d.imag() * d.imag());
  const double bxy = a * (-6.0 / r2 * w * w * d.real() * d.imag());
  const double th = theta(t);
  // phi = theta * (-B_y, B_x)
  return {-th * bxy, -th * byy, th * bxx, th * bxy};
}

double momentum_residual(const Trajectory& traj, const FlowSolver& solver,
                         const MomentumTestField& phi, double grid_h) {
  if (traj.snapshots.size() < 2)
    throw std::invalid_argument("momentum_residual needs at least two snapshots");
  for (const auto& obs : solver.obstacles()) {
    if (obs.distance(phi.center) <= phi.radius)
      throw std::invalid_argument("phi support intersects an obstacle");
  }
  if (phi.t_end > traj.times.back() + 1e-12)
    throw std::invalid_argument("phi support exceeds the simulated time span");

  // Spatial midpoint nodes over the bump support.
  std::vector<Cx> nodes;
  const double h = grid_h;
  const int nc = static_cast<int>(std::ceil(2.0 * phi.radius / h));
  for (int j = 0; j < nc; ++j)
    for (int i = 0; i < nc; ++i) {
      const Cx x = phi.center + Cx(-phi.radius + (i + 0.5) * h, -phi.radius + (j + 0.5) * h);
      if (abs2(x - phi.center) < phi.radius * phi.radius) nodes.push_back(x);
    }
  const double w_cell = h * h;

  // Velocities at every snapshot time on the node set.
  const std::size_t nt = traj.times.size();
  std::vector<std::vector<Cx>> uvals(nt);
  for (std::size_t it = 0; it < nt; ++it) {
    const VortexBlobs& blobs = traj.snapshots[it];
    StreamDecomposition d = solver.decompose(blobs);
    uvals[it].resize(nodes.size());
    parallel_for(nodes.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t p = b; p < e; ++p)
        uvals[it][p] = solver.velocity_at(d, blobs, nodes[p]);
    });
  }

  auto spatial_timeterm = [&](std::size_t it) {
    // int u . perp(grad bump) dx, the theta factor handled by the caller
    double acc = 0.0;
    for (std::size_t p = 0; p < nodes.size(); ++p)
      acc += dot(uvals[it][p], perp(phi.bump_gradient(nodes[p])));
    return acc * w_cell;
  };
  auto spatial_convective = [&](std::size_t it) {
    double acc = 0.0;
    const double t = traj.times[it];
    for (std::size_t p = 0; p < nodes.size(); ++p) {
      const auto g = phi.phi_grad(t, nodes[p]);
      const Cx u = uvals[it][p];
      acc += u.real() * u.real() * g[0] + u.real() * u.imag() * (g[1] + g[2]) +
             u.imag() * u.imag() * g[3];
    }
    return acc * w_cell;
  };

  // Time quadrature: exact theta increments against the averaged u-term keeps
  // steady flows exactly cancelling the initial-data term; trapezoid for the
  // convective part.
  double total = 0.0;
  for (std::size_t it = 0; it + 1 < nt; ++it) {
    const double dth = phi.theta(traj.times[it + 1]) - phi.theta(traj.times[it]);
    if (dth != 0.0) total += dth * 0.5 * (spatial_timeterm(it) + spatial_timeterm(it + 1));
    const double dt = traj.times[it + 1] - traj.times[it];
    total += 0.5 * dt * (spatial_convective(it) + spatial_convective(it + 1));
  }
  // + int u0 . phi(0, .)
  double init = 0.0;
  for (std::size_t p = 0; p < nodes.size(); ++p)
    init += dot(uvals[0][p], phi.phi(traj.times[0], nodes[p]));
  total += init * w_cell;
  return std::abs(total);
}

// ---------------------------------------------------------------------------
// poincare_estimate

namespace {

struct PoincareGrid {
  int nx = 0, ny = 0;
  std::vector<char> cls;  // 0 free, 1 dirichlet (obstacle), 2 outside ball

  void apply(const std::vector<double>& v, std::vector<double>& out) const {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const std::size_t q = static_cast<std::size_t>(j) * nx + i;
        if (cls[q] != 0) {
          out[q] = 0.0;
          continue;
        }
        double acc = 0.0;
        auto edge = [&](int ii, int jj) {
          if (ii < 0 || jj < 0 || ii >= nx || jj >= ny) return;
          const std::size_t r = static_cast<std::size_t>(jj) * nx + ii;
          if (cls[r] == 2) return;  // natural boundary at the outer circle
          acc += v[q] - (cls[r] == 0 ? v[r] : 0.0);
        };
        edge(i - 1, j);
        edge(i + 1, j);
        edge(i, j - 1);
        edge(i, j + 1);
        out[q] = acc;
      }
    }
  }
};

}  // namespace

double poincare_estimate(const JordanCurve& obstacle_curve, double rho, double h) {
  if (h <= 0.0 || h >= rho) throw std::invalid_argument("grid too coarse");
  const int n = static_cast<int>(std::ceil(2.0 * rho / h)) + 1;
  PoincareGrid grid;
  grid.nx = grid.ny = n;
  grid.cls.assign(static_cast<std::size_t>(n) * n, 0);
  std::size_t dirichlet = 0, free_nodes = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const Cx x(-rho + i * h, -rho + j * h);
      const std::size_t q = static_cast<std::size_t>(j) * n + i;
      if (std::abs(x) >= rho) {
        grid.cls[q] = 2;
      } else if (obstacle_curve.contains(x)) {
        grid.cls[q] = 1;
        ++dirichlet;
      } else {
        ++free_nodes;
      }
    }
  }
  if (dirichlet == 0)
    throw std::invalid_argument("grid unresolved relative to obstacle features");
  if (free_nodes == 0) throw std::invalid_argument("obstacle fills the ball");

  const std::size_t nn = grid.cls.size();
  // warm-started CG; successive inverse-iteration solves start close
  auto cg_solve = [&](const std::vector<double>& b, std::vector<double>& x) {
    std::vector<double> r(nn), p(nn), ap(nn);
    grid.apply(x, ap);
    for (std::size_t q = 0; q < nn; ++q) r[q] = b[q] - ap[q];
    p = r;
    double rr = 0.0;
    for (double v : r) rr += v * v;
    double bb = 0.0;
    for (double v : b) bb += v * v;
    for (int it = 0; it < 20000 && rr > 1e-18 * std::max(1e-300, bb); ++it) {
      grid.apply(p, ap);
      double pap = 0.0;
      for (std::size_t q = 0; q < nn; ++q) pap += p[q] * ap[q];
      if (pap <= 0.0) break;
      const double a = rr / pap;
      for (std::size_t q = 0; q < nn; ++q) {
        x[q] += a * p[q];
        r[q] -= a * ap[q];
      }
      double rr2 = 0.0;
      for (double v : r) rr2 += v * v;
      const double beta = rr2 / rr;
      rr = rr2;
      for (std::size_t q = 0; q < nn; ++q) p[q] = r[q] + beta * p[q];
    }
  };

  // Inverse power iteration on A x = lambda h^2 x.
  std::vector<double> x(nn, 0.0), y(nn, 0.0), b(nn, 0.0), ax(nn);
  for (std::size_t q = 0; q < nn; ++q)
    if (grid.cls[q] == 0) x[q] = 1.0;
  double lambda = 0.0, lambda_prev = -1.0;
  const double h2 = h * h;
  for (int it = 0; it < 200; ++it) {
    for (std::size_t q = 0; q < nn; ++q) b[q] = grid.cls[q] == 0 ? h2 * x[q] : 0.0;
    cg_solve(b, y);
    double norm = 0.0;
    for (double v : y) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) throw std::runtime_error("poincare inverse iteration collapsed");
    for (std::size_t q = 0; q < nn; ++q) x[q] = y[q] / norm;
    grid.apply(x, ax);
    double num = 0.0, den = 0.0;
    for (std::size_t q = 0; q < nn; ++q) {
      num += x[q] * ax[q];
      den += h2 * x[q] * x[q];
    }
    lambda = num / den;
    if (lambda_prev > 0.0 && std::abs(lambda - lambda_prev) < 1e-8 * lambda) break;
    lambda_prev = lambda;
    // warm start for the next solve: y ~ A^-1 (h^2 x) ~ (h^2 / lambda) x
    for (std::size_t q = 0; q < nn; ++q) y[q] = lambda > 0.0 ? h2 * x[q] / lambda : 0.0;
  }
  return 1.0 / std::sqrt(lambda);
}

}  // namespace exflow
