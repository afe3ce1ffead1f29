#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "exflow/field.hpp"
#include "exflow/geometry.hpp"

namespace exflow {

/// Validation failure that names the offending configuration field.
struct ScenarioError : std::runtime_error {
  std::string field;
  ScenarioError(std::string field_, const std::string& what_)
      : std::runtime_error(what_), field(std::move(field_)) {}
};

struct BlobSpec {
  Cx position;
  double strength = 0.0;
};

struct PatchSpec {
  Cx center{0.0, 0.0};
  double radius = 1.0;
  double total_strength = 1.0;
  int count = 100;
  std::string profile = "uniform";  // or "gaussian"
};

struct FieldGridSpec {
  double x0 = -4, x1 = 4, y0 = -4, y1 = 4;
  int nx = 81, ny = 81;
  bool every_cadence = false;
};

struct Scenario {
  int version = 1;
  std::string mode = "exterior";  // or "free-plane"
  std::vector<SingularObstacle> obstacles;
  int approximation_index = 32;
  std::vector<double> gamma;
  std::vector<BlobSpec> blobs;
  std::optional<PatchSpec> patch;
  double dt = 0.01;
  double t_final = 1.0;
  int diagnostics_cadence = 10;
  // solver tolerances
  double map_residual = 1e-6;
  int collocation_degree = 64;
  int correction_degree = 24;
  double eps_blob = 0.05;
  double cutoff_eps = 0.0;  // 0: choose from the geometry
  int alpha_cells_per_eps = 16;
  int diag_cells_per_eps = 64;
  double grid_h = 0.02;
  std::string output_dir = "out";
  std::optional<FieldGridSpec> field_grid;

  static Scenario from_json(const nlohmann::json& j);
  static Scenario from_file(const std::string& path);
  void validate() const;
  /// Deterministic blob initialization (explicit list or patch sampler).
  VortexBlobs make_blobs() const;
  std::size_t obstacle_count() const { return obstacles.size(); }
};

struct RunOutputs {
  std::string trajectory_csv;
  std::string diagnostics_csv;
  std::vector<std::string> field_csvs;
};

/// Executes the scenario and writes trajectory/diagnostics/field CSVs under
/// scenario.output_dir. Returns the file list.
RunOutputs run_scenario(const Scenario& scenario, bool quiet = true);

/// Named parametric studies; writes report JSON to out_dir and returns it.
nlohmann::json run_study(const nlohmann::json& study_spec, const std::string& out_dir,
                         bool quiet = true);

}  // namespace exflow
