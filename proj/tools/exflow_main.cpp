// Command line entry point: `exflow run <scenario.json>` executes a
// simulation, `exflow study <study.json>` runs a named parametric study.

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "exflow/common.hpp"
#include "exflow/scenario.hpp"

namespace {

void emit_error_json(const std::string& kind, const std::string& field,
                     const std::string& message) {
  nlohmann::json j;
  j["error"] = kind;
  if (!field.empty()) j["field"] = field;
  j["message"] = message;
  std::cout << j.dump() << std::endl;
}

int resolve_threads(int cli_threads) {
  if (cli_threads != 0) return cli_threads;
  if (const char* env = std::getenv("SIM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return -1;  // hardware concurrency
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vortex dynamics outside singular obstacles"};
  app.require_subcommand(1);
  app.fallthrough();  // accept the global options after the subcommand too

  std::string out_override;
  bool quiet = false;
  int threads = 0;
  app.add_option("--out", out_override, "override the output directory");
  app.add_flag("--quiet", quiet, "suppress progress output");
  app.add_option("--threads", threads, "worker threads (default: SIM_THREADS or all cores)");

  std::string scenario_path, study_path;
  CLI::App* run = app.add_subcommand("run", "execute a scenario");
  run->add_option("scenario", scenario_path, "scenario JSON file")->required();
  CLI::App* study = app.add_subcommand("study", "run a named parametric study");
  study->add_option("study", study_path, "study JSON file")->required();

  CLI11_PARSE(app, argc, argv);
  exflow::set_threads(resolve_threads(threads));

  try {
    if (run->parsed()) {
      exflow::Scenario sc = exflow::Scenario::from_file(scenario_path);
      if (!out_override.empty()) sc.output_dir = out_override;
      exflow::run_scenario(sc, quiet);
    } else {
      std::ifstream in(study_path);
      if (!in) {
        emit_error_json("io", "<file>", "cannot open study file " + study_path);
        return 2;
      }
      nlohmann::json spec;
      in >> spec;
      const std::string out_dir =
          !out_override.empty() ? out_override : spec.value("output_dir", std::string("out"));
      const nlohmann::json report = exflow::run_study(spec, out_dir, quiet);
      if (!quiet) std::cout << report.dump(2) << std::endl;
    }
  } catch (const exflow::ScenarioError& e) {
    emit_error_json("validation", e.field, e.what());
    return 2;
  } catch (const nlohmann::json::exception& e) {
    emit_error_json("parse", "", e.what());
    return 2;
  } catch (const std::exception& e) {
    emit_error_json("numerical", "", e.what());
    return 1;
  }
  return 0;
}
