#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "dimtp/geo.hpp"
#include "dimtp/predictor.hpp"

namespace dimtp {

// Scenario document: {dt, t0, L_o, L_p, trajectories: [{mmsi, points}]}.
nlohmann::json scenario_to_json(const Scenario& sc, int observed_len, int predicted_len);
Scenario scenario_from_json(const nlohmann::json& j);

void write_scenario_file(const std::string& path, const Scenario& sc, int observed_len,
                         int predicted_len);
Scenario read_scenario_file(const std::string& path);

nlohmann::json mask_to_json(const EncounterMask& mask);
EncounterMask mask_from_json(const nlohmann::json& j);

struct IndexEntry {
  std::string path;  // scenario file, relative to the index
  double t0 = 0.0;
  int vessels = 0;
  EncounterMask mask;
};

// Index document: {config, scenarios: [{path, t0, m, mask}]}.
void write_index_file(const std::string& path, const std::vector<IndexEntry>& entries,
                      const nlohmann::json& config);
std::vector<IndexEntry> read_index_file(const std::string& path);

// Labels sidecar: {config, scenarios: [{path, labels}]}, labels aligned with
// the trajectory order of the scenario file.
void write_labels_file(const std::string& path, const std::vector<std::string>& scenario_paths,
                       const std::vector<std::vector<int>>& labels,
                       const nlohmann::json& config = {});
std::vector<std::vector<int>> read_labels_file(const std::string& path,
                                               const std::vector<std::string>& scenario_paths);

nlohmann::json prediction_to_json(const ScenarioPrediction& pred, const Scenario& scenario,
                                  int observed_len, const nlohmann::json& config);
void write_prediction_file(const std::string& path, const ScenarioPrediction& pred,
                           const Scenario& scenario, int observed_len,
                           const nlohmann::json& config);

// Scenario paths listed in an index, resolved relative to the index location.
std::vector<std::string> scenario_paths_from_index(const std::string& index_path);

}  // namespace dimtp
