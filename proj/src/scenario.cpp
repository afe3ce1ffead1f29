#include "exflow/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "exflow/diagnostics.hpp"
#include "exflow/field.hpp"
#include "exflow/transport.hpp"

namespace exflow {

namespace {

Cx read_point(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ScenarioError(field, "expected a [x, y] pair");
  return Cx(j[0].get<double>(), j[1].get<double>());
}

SingularObstacle read_obstacle(const nlohmann::json& j, int id) {
  const std::string field = "obstacles[" + std::to_string(id) + "]";
  if (!j.contains("kind")) throw ScenarioError(field + ".kind", "missing obstacle kind");
  const std::string kind = j.at("kind");
  try {
    if (kind == "disk")
      return SingularObstacle::disk(read_point(j.at("center"), field + ".center"),
                                    j.at("radius").get<double>(), id);
    if (kind == "ellipse")
      return SingularObstacle::ellipse(read_point(j.at("center"), field + ".center"),
                                       j.at("a").get<double>(), j.at("b").get<double>(), id);
    if (kind == "segment")
      return SingularObstacle::segment(read_point(j.at("a"), field + ".a"),
                                       read_point(j.at("b"), field + ".b"), id);
    if (kind == "polyline") {
      std::vector<Cx> pts;
      for (const auto& p : j.at("points")) pts.push_back(read_point(p, field + ".points"));
      return SingularObstacle::polyline(std::move(pts), id);
    }
    if (kind == "koch-flake")
      return SingularObstacle::koch_flake(read_point(j.at("center"), field + ".center"),
                                          j.at("scale").get<double>(), j.at("level").get<int>(),
                                          id);
    if (kind == "custom-pointcloud") {
      std::vector<Cx> pts;
      for (const auto& p : j.at("points")) pts.push_back(read_point(p, field + ".points"));
      return SingularObstacle::point_cloud(std::move(pts), id);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(field, e.what());
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(field, e.what());
  }
  throw ScenarioError(field + ".kind", "unknown obstacle kind '" + kind + "'");
}

}  // namespace

Scenario Scenario::from_json(const nlohmann::json& j) {
  Scenario s;
  try {
    s.version = j.value("version", 1);
    s.mode = j.value("mode", std::string("exterior"));
    if (j.contains("obstacles")) {
      int id = 0;
      for (const auto& o : j.at("obstacles")) s.obstacles.push_back(read_obstacle(o, id++));
    }
    s.approximation_index = j.value("approximation_index", 32);
    if (j.contains("gamma")) s.gamma = j.at("gamma").get<std::vector<double>>();
    if (j.contains("blobs")) {
      for (const auto& b : j.at("blobs")) {
        BlobSpec bs;
        bs.position = Cx(b.at("x").get<double>(), b.at("y").get<double>());
        bs.strength = b.at("gamma").get<double>();
        s.blobs.push_back(bs);
      }
    }
    if (j.contains("patch")) {
      const auto& p = j.at("patch");
      PatchSpec ps;
      ps.center = read_point(p.at("center"), "patch.center");
      ps.radius = p.at("radius").get<double>();
      ps.total_strength = p.at("total_gamma").get<double>();
      ps.count = p.at("count").get<int>();
      ps.profile = p.value("profile", std::string("uniform"));
      s.patch = ps;
    }
    s.dt = j.value("dt", 0.01);
    s.t_final = j.value("t_final", 1.0);
    s.diagnostics_cadence = j.value("diagnostics_cadence", 10);
    if (j.contains("tolerances")) {
      const auto& t = j.at("tolerances");
      s.map_residual = t.value("map_residual", s.map_residual);
      s.collocation_degree = t.value("collocation_degree", s.collocation_degree);
      s.correction_degree = t.value("correction_degree", s.correction_degree);
      s.eps_blob = t.value("eps_blob", s.eps_blob);
      s.cutoff_eps = t.value("cutoff_eps", s.cutoff_eps);
      s.grid_h = t.value("grid_h", s.grid_h);
      s.alpha_cells_per_eps = t.value("alpha_cells_per_eps", s.alpha_cells_per_eps);
      s.diag_cells_per_eps = t.value("diag_cells_per_eps", s.diag_cells_per_eps);
    }
    s.output_dir = j.value("output_dir", std::string("out"));
    if (j.contains("field_grid")) {
      const auto& g = j.at("field_grid");
      FieldGridSpec fg;
      fg.x0 = g.value("x0", fg.x0);
      fg.x1 = g.value("x1", fg.x1);
      fg.y0 = g.value("y0", fg.y0);
      fg.y1 = g.value("y1", fg.y1);
      fg.nx = g.value("nx", fg.nx);
      fg.ny = g.value("ny", fg.ny);
      fg.every_cadence = g.value("every_cadence", false);
      s.field_grid = fg;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError("<root>", e.what());
  }
  s.validate();
  return s;
}

Scenario Scenario::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("<file>", "cannot open scenario file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError("<file>", std::string("parse error: ") + e.what());
  }
  return from_json(j);
}

void Scenario::validate() const {
  if (mode != "exterior" && mode != "free-plane")
    throw ScenarioError("mode", "mode must be 'exterior' or 'free-plane'");
  if (mode == "exterior") {
    if (obstacles.empty()) throw ScenarioError("obstacles", "exterior mode needs obstacles");
    if (gamma.size() != obstacles.size())
      throw ScenarioError("gamma", "gamma length " + std::to_string(gamma.size()) +
                                       " does not match obstacle count " +
                                       std::to_string(obstacles.size()));
    if (approximation_index < 1)
      throw ScenarioError("approximation_index", "must be a positive index");
  } else if (!gamma.empty()) {
    throw ScenarioError("gamma", "free-plane mode admits no circulations");
  }
  if (dt <= 0.0) throw ScenarioError("dt", "time step must be positive");
  if (t_final <= 0.0) throw ScenarioError("t_final", "final time must be positive");
  if (diagnostics_cadence < 1) throw ScenarioError("diagnostics_cadence", "must be >= 1");
  if (eps_blob <= 0.0) throw ScenarioError("tolerances.eps_blob", "must be positive");
  if (grid_h <= 0.0) throw ScenarioError("tolerances.grid_h", "must be positive");
  if (map_residual <= 0.0) throw ScenarioError("tolerances.map_residual", "must be positive");
  if (collocation_degree < 2) throw ScenarioError("tolerances.collocation_degree", "too small");
  if (correction_degree < 1) throw ScenarioError("tolerances.correction_degree", "too small");
}

VortexBlobs Scenario::make_blobs() const {
  VortexBlobs b;
  b.core = eps_blob;
  for (const auto& spec : blobs) {
    b.positions.push_back(spec.position);
    b.strengths.push_back(spec.strength);
  }
  if (patch) {
    // Sunflower layout: deterministic, near-uniform coverage of the disk.
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    std::vector<double> w(patch->count);
    double wsum = 0.0;
    std::vector<Cx> pos(patch->count);
    for (int i = 0; i < patch->count; ++i) {
      const double r = patch->radius * std::sqrt((i + 0.5) / patch->count);
      const double th = golden * i;
      pos[i] = patch->center + r * Cx(std::cos(th), std::sin(th));
      w[i] = patch->profile == "gaussian" ? std::exp(-4.0 * sq(r / patch->radius)) : 1.0;
      wsum += w[i];
    }
    for (int i = 0; i < patch->count; ++i) {
      b.positions.push_back(pos[i]);
      b.strengths.push_back(patch->total_strength * w[i] / wsum);
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// CSV emission

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  out << "t,blob_id,x,y,gamma\n";
  for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
    const VortexBlobs& b = traj.snapshots[s];
    for (std::size_t j = 0; j < b.size(); ++j) {
      out << fmt(traj.times[s]) << ',' << j << ',' << fmt(b.positions[j].real()) << ','
          << fmt(b.positions[j].imag()) << ',' << fmt(b.strengths[j]) << '\n';
    }
  }
}

void write_diagnostics_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  const std::size_t k = traj.diagnostics.empty() ? 0 : traj.diagnostics[0].circulations.size();
  out << "t,l1_mass,signed_mass,l2_norm,linf_norm";
  for (std::size_t i = 1; i <= k; ++i) out << ",circ_" << i;
  for (std::size_t i = 1; i <= k; ++i) out << ",alpha_" << i;
  out << ",tangency\n";
  for (const auto& r : traj.diagnostics) {
    out << fmt(r.time) << ',' << fmt(r.l1_mass) << ',' << fmt(r.signed_mass) << ','
        << fmt(r.l2_norm) << ',' << fmt(r.linf_norm);
    for (double c : r.circulations) out << ',' << fmt(c);
    for (double a : r.alpha) out << ',' << fmt(a);
    out << ',' << fmt(r.tangency_residual) << '\n';
  }
}

void write_field_csv(const std::string& path, const FlowSolver& solver, const VortexBlobs& blobs,
                     const FieldGridSpec& g) {
  StreamDecomposition d = solver.decompose(blobs);
  std::ofstream out(path);
  out << "x,y,psi,u1,u2\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<Cx> pts;
  pts.reserve(static_cast<std::size_t>(g.nx) * g.ny);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      pts.emplace_back(g.x0 + (g.x1 - g.x0) * i / (g.nx - 1),
                       g.y0 + (g.y1 - g.y0) * j / (g.ny - 1));
  std::vector<double> psi(pts.size(), nan);
  std::vector<Cx> vel(pts.size(), Cx(nan, nan));
  parallel_for(pts.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      if (!solver.exterior(pts[p])) continue;
      if (solver.free_plane()) {
        psi[p] = 0.0;
        for (std::size_t jj = 0; jj < blobs.size(); ++jj)
          psi[p] += blobs.strengths[jj] / kTwoPi *
                    std::log(std::max(std::abs(pts[p] - blobs.positions[jj]), blobs.core));
        vel[p] = fullplane_biot_savart(blobs, pts[p]);
      } else {
        psi[p] = d.stream_value(blobs, pts[p]);
        vel[p] = velocity_unchecked(d, blobs, pts[p]);
      }
    }
  });
  for (std::size_t p = 0; p < pts.size(); ++p)
    out << fmt(pts[p].real()) << ',' << fmt(pts[p].imag()) << ',' << fmt(psi[p]) << ','
        << fmt(vel[p].real()) << ',' << fmt(vel[p].imag()) << '\n';
}

}  // namespace

RunOutputs run_scenario(const Scenario& sc, bool quiet) {
  sc.validate();
  std::filesystem::create_directories(sc.output_dir);
  Trajectory traj = simulate(sc);

  RunOutputs out;
  out.trajectory_csv = sc.output_dir + "/trajectory.csv";
  out.diagnostics_csv = sc.output_dir + "/diagnostics.csv";
  write_trajectory_csv(out.trajectory_csv, traj);
  write_diagnostics_csv(out.diagnostics_csv, traj);

  FieldGridSpec grid = sc.field_grid.value_or(FieldGridSpec{});
  if (!sc.field_grid) {
    // default window framing the action
    double lo_x = -2, hi_x = 2, lo_y = -2, hi_y = 2;
    for (const auto& o : sc.obstacles)
      for (const Cx& p : o.samples) {
        lo_x = std::min(lo_x, p.real() - 1.0);
        hi_x = std::max(hi_x, p.real() + 1.0);
        lo_y = std::min(lo_y, p.imag() - 1.0);
        hi_y = std::max(hi_y, p.imag() + 1.0);
      }
    for (const auto& b : traj.snapshots.back().positions) {
      lo_x = std::min(lo_x, b.real() - 1.0);
      hi_x = std::max(hi_x, b.real() + 1.0);
      lo_y = std::min(lo_y, b.imag() - 1.0);
      hi_y = std::max(hi_y, b.imag() + 1.0);
    }
    grid.x0 = lo_x;
    grid.x1 = hi_x;
    grid.y0 = lo_y;
    grid.y1 = hi_y;
  }
  if (sc.field_grid && sc.field_grid->every_cadence) {
    for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
      char name[64];
      std::snprintf(name, sizeof name, "/fields_%04zu.csv", s);
      const std::string path = sc.output_dir + name;
      write_field_csv(path, *traj.solver, traj.snapshots[s], grid);
      out.field_csvs.push_back(path);
    }
  } else {
    const std::string path = sc.output_dir + "/fields_final.csv";
    write_field_csv(path, *traj.solver, traj.snapshots.back(), grid);
    out.field_csvs.push_back(path);
  }
  if (!quiet) {
    std::cerr << "wrote " << out.trajectory_csv << ", " << out.diagnostics_csv << " and "
              << out.field_csvs.size() << " field snapshot(s)\n";
  }
  return out;
}

}  // namespace exflow
