// File-level workflows behind the command-line tool and the generic C entry
// point. Each command takes flag values keyed by flag name (without dashes)
// and returns a short human-readable summary. Errors surface as
// ValidationError or IoError.

#ifndef ARSAL_PIPELINE_HPP
#define ARSAL_PIPELINE_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "arsal/analysis.hpp"
#include "arsal/core.hpp"
#include "arsal/fusion.hpp"
#include "arsal/gazeproc.hpp"
#include "arsal/io.hpp"
#include "arsal/salmodels.hpp"
#include "arsal/vqsal.hpp"

namespace arsal::app {

using Args = std::map<std::string, std::string>;

/// Effective configuration: the --config file overlaid by individual flags.
struct Settings {
  std::uint64_t seed = 0;
  int jobs = 1;
  ViewportSpec viewport;
  gaze::FixationParams fixation;
  double sigma_deg = 3.34;
  models::ModelConfig models;
  fusion::RegressorConfig regressor;
  vq::VQConfig vq;
  vq::Schedule schedule;
  /// Square working resolution of the VQ networks.
  int vq_size = 32;
  /// Canonical JSON of everything above; hashed into every sidecar.
  nlohmann::json canonical;
};

Settings load_settings(const Args& args);

ViewportSpec viewport_from_json(const nlohmann::json& j, ViewportSpec base = {});
nlohmann::json viewport_to_json(const ViewportSpec& spec);
gaze::FixationParams fixation_params_from_json(const nlohmann::json& j, gaze::FixationParams base = {});

/// AR, background viewport and superimposed image of one manifest record.
struct PreparedScenario {
  ViewportImage ar_padded;
  ViewportImage bg_view;
  ViewportImage superimposed;
};

PreparedScenario prepare_scenario(const analysis::ScenarioRecord& record, const ViewportSpec& spec);

/// Ground truth written by gt-maps: "<dir>/<id>.f32" and "<dir>/<id>.fixations.csv".
struct GroundTruth {
  SaliencyDensity density;
  FixationMap fixations;
};
GroundTruth load_ground_truth(const std::filesystem::path& dir, const std::string& scenario_id);

std::vector<std::string> command_names();
/// Runs a command by name ("composite", "analyze-benchmark", ...).
std::string run_command(const std::string& name, const Args& args);

}  // namespace arsal::app

#endif  // ARSAL_PIPELINE_HPP
