#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "exflow/conformal.hpp"
#include "exflow/diagnostics.hpp"
#include "exflow/scenario.hpp"
#include "exflow/transport.hpp"

namespace exflow {

namespace {

std::vector<Cx> ring(Cx center, double radius, int count) {
  std::vector<Cx> pts;
  pts.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double th = kTwoPi * (i + 0.25) / count;
    pts.push_back(center + radius * Cx(std::cos(th), std::sin(th)));
  }
  return pts;
}

Scenario orbit_scenario(double dt, double t_final) {
  Scenario sc;
  sc.mode = "exterior";
  sc.obstacles = {SingularObstacle::disk(Cx(0, 0), 1.0, 0)};
  sc.gamma = {0.0};
  sc.approximation_index = 64;  // circle approximant radius 1 + 1/64
  sc.blobs = {{Cx(2.0, 0.0), kTwoPi}};
  sc.dt = dt;
  sc.t_final = t_final;
  sc.diagnostics_cadence = 1000000;  // endpoints only
  sc.map_residual = 1e-10;
  return sc;
}

nlohmann::json study_caratheodory_circle(const nlohmann::json& params) {
  std::vector<int> ns = params.value("n", std::vector<int>{4, 8, 16, 32});
  std::vector<ExteriorMap> maps;
  std::vector<std::pair<int, const ExteriorMap*>> seq;
  maps.reserve(ns.size());
  for (int n : ns) maps.push_back(ExteriorMap::fit(JordanCurve::circle(Cx(0, 0), 1.0 + 1.0 / n)));
  for (std::size_t i = 0; i < ns.size(); ++i) seq.emplace_back(ns[i], &maps[i]);
  auto rows = caratheodory_check(
      seq, [](Cx z) { return z; }, [](Cx) { return Cx(1, 0); }, ring(Cx(0, 0), 2.0, 64));
  nlohmann::json out;
  bool monotone = true;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i)
    monotone = monotone && rows[i + 1].sup_map < rows[i].sup_map;
  for (const auto& r : rows)
    out["rows"].push_back({{"n", r.n}, {"sup_map", r.sup_map}, {"sup_deriv", r.sup_derivative}});
  out["monotone"] = monotone;
  out["final_sup_map"] = rows.back().sup_map;
  out["pass"] = monotone;
  return out;
}

nlohmann::json study_caratheodory_ellipse(const nlohmann::json& params) {
  std::vector<int> ns = params.value("n", std::vector<int>{4, 8, 16, 32});
  std::vector<ExteriorMap> maps;
  std::vector<std::pair<int, const ExteriorMap*>> seq;
  maps.reserve(ns.size());
  for (int n : ns)
    maps.push_back(ExteriorMap::fit(JordanCurve::ellipse(Cx(0, 0), 1.0, 1.0 / n), 64, 1e-4));
  for (std::size_t i = 0; i < ns.size(); ++i) seq.emplace_back(ns[i], &maps[i]);
  auto rows = caratheodory_check(seq, segment_exterior_map, segment_exterior_map_derivative,
                                 ring(Cx(0, 0), 2.0, 64));
  nlohmann::json out;
  bool monotone = true;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i)
    monotone = monotone && rows[i + 1].sup_map < rows[i].sup_map;
  for (const auto& r : rows)
    out["rows"].push_back({{"n", r.n}, {"sup_map", r.sup_map}, {"sup_deriv", r.sup_derivative}});
  out["monotone"] = monotone;
  out["pass"] = monotone;
  return out;
}

nlohmann::json study_dt_order(const nlohmann::json& params) {
  const double t_final = params.value("t_final", 6.0);
  const double dt0 = params.value("dt0", 0.2);
  const int levels = params.value("levels", 4);
  std::vector<Cx> endpoints;
  for (int l = 0; l < levels; ++l) {
    Trajectory traj = simulate(orbit_scenario(dt0 / (1 << l), t_final));
    endpoints.push_back(traj.snapshots.back().positions[0]);
  }
  nlohmann::json out;
  std::vector<double> errs;
  for (int l = 0; l + 1 < levels; ++l) errs.push_back(std::abs(endpoints[l] - endpoints[l + 1]));
  bool pass = true;
  for (std::size_t l = 0; l + 1 < errs.size(); ++l) {
    const double ratio = errs[l] / std::max(1e-300, errs[l + 1]);
    out["rows"].push_back({{"dt", dt0 / (1 << l)}, {"error", errs[l]}, {"ratio", ratio}});
    pass = pass && ratio >= 12.0 && ratio <= 20.0;
  }
  out["pass"] = pass;
  return out;
}

nlohmann::json study_capacity_point(const nlohmann::json& params) {
  std::vector<double> radii = params.value("radii", std::vector<double>{0.2, 0.05, 0.0125});
  nlohmann::json out;
  std::vector<double> vals;
  for (double r : radii) {
    const double h = r / 4.0;
    const double c = capacity_estimate(SingularObstacle::disk(Cx(0, 0), r), 1.0, h);
    vals.push_back(c);
    out["rows"].push_back({{"radius", r}, {"h", h}, {"capacity", c}});
  }
  bool decreasing = true;
  for (std::size_t i = 0; i + 1 < vals.size(); ++i)
    decreasing = decreasing && vals[i + 1] < vals[i];
  out["pass"] = decreasing;
  return out;
}

nlohmann::json study_capacity_segment(const nlohmann::json& params) {
  std::vector<double> hs = params.value("h", std::vector<double>{0.08, 0.04, 0.02});
  const double floor = params.value("floor", 1.0);
  const SingularObstacle seg = SingularObstacle::segment(Cx(-1, 0), Cx(1, 0));
  nlohmann::json out;
  bool above = true;
  for (double h : hs) {
    const double c = capacity_estimate(seg, 2.0, h);
    above = above && c > floor;
    out["rows"].push_back({{"h", h}, {"capacity", c}});
  }
  out["floor"] = floor;
  out["pass"] = above;
  return out;
}

nlohmann::json study_poincare_segment(const nlohmann::json& params) {
  std::vector<int> ns = params.value("n", std::vector<int>{8, 16, 32});
  const double rho = params.value("rho", 2.0);
  const double h = params.value("h", 1.0 / 64.0);
  const SingularObstacle seg = SingularObstacle::segment(Cx(-1, 0), Cx(1, 0));
  nlohmann::json out;
  std::vector<double> vals;
  for (int n : ns) {
    const JordanCurve curve = approximation_sequence(seg, n);
    const double c = poincare_estimate(curve, rho, h);
    vals.push_back(c);
    out["rows"].push_back({{"n", n}, {"constant", c}});
  }
  std::vector<double> sorted = vals;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[sorted.size() / 2];
  bool uniform = true;
  for (double v : vals) uniform = uniform && v <= 2.0 * median && v >= 0.5 * median;
  out["median"] = median;
  out["pass"] = uniform;
  return out;
}

nlohmann::json study_n_refinement(const nlohmann::json& params) {
  std::vector<int> ns = params.value("n", std::vector<int>{8, 16, 32});
  const double t_final = params.value("t_final", 1.0);
  std::vector<std::vector<Cx>> endpoints;
  for (int n : ns) {
    Scenario sc;
    sc.mode = "exterior";
    sc.obstacles = {SingularObstacle::segment(Cx(-1, 0), Cx(1, 0), 0)};
    sc.gamma = {1.0};
    sc.approximation_index = n;
    sc.blobs = {{Cx(0.0, 1.5), 2.0}, {Cx(2.2, 0.4), -1.0}, {Cx(-1.8, -0.9), 1.0}};
    sc.dt = 0.01;
    sc.t_final = t_final;
    sc.diagnostics_cadence = 1000000;
    sc.map_residual = 1e-3;  // near-singular approximants fit less tightly
    Trajectory traj = simulate(sc);
    endpoints.push_back(traj.snapshots.back().positions);
  }
  nlohmann::json out;
  std::vector<double> dist;
  for (std::size_t i = 0; i + 1 < ns.size(); ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < endpoints[i].size(); ++j)
      d = std::max(d, std::abs(endpoints[i][j] - endpoints[i + 1][j]));
    dist.push_back(d);
    out["rows"].push_back({{"n", ns[i]}, {"n_next", ns[i + 1]}, {"endpoint_distance", d}});
  }
  bool decreasing = true;
  for (std::size_t i = 0; i + 1 < dist.size(); ++i)
    decreasing = decreasing && dist[i + 1] < dist[i];
  out["pass"] = decreasing;
  return out;
}

}  // namespace

nlohmann::json run_study(const nlohmann::json& spec, const std::string& out_dir, bool quiet) {
  static const char* names[] = {"caratheodory-circle", "caratheodory-ellipse", "dt-order",
                                "capacity-point",      "capacity-segment",     "poincare-segment",
                                "n-refinement"};
  if (!spec.contains("study")) throw ScenarioError("study", "missing study name");
  const std::string name = spec.at("study");
  const nlohmann::json params = spec.value("params", nlohmann::json::object());

  nlohmann::json report;
  if (name == "caratheodory-circle")
    report = study_caratheodory_circle(params);
  else if (name == "caratheodory-ellipse")
    report = study_caratheodory_ellipse(params);
  else if (name == "dt-order")
    report = study_dt_order(params);
  else if (name == "capacity-point")
    report = study_capacity_point(params);
  else if (name == "capacity-segment")
    report = study_capacity_segment(params);
  else if (name == "poincare-segment")
    report = study_poincare_segment(params);
  else if (name == "n-refinement")
    report = study_n_refinement(params);
  else {
    std::string list;
    for (const char* n : names) list += std::string(" ") + n;
    throw ScenarioError("study", "unknown study '" + name + "'; available:" + list);
  }
  report["study"] = name;

  std::filesystem::create_directories(out_dir);
  const std::string path = out_dir + "/report_" + name + ".json";
  std::ofstream out(path);
  out << report.dump(2) << '\n';
  if (!quiet) std::cerr << "wrote " << path << '\n';
  return report;
}

}  // namespace exflow
