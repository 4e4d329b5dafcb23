#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dimtp/geo.hpp"
#include "dimtp/model.hpp"

namespace dimtp {

struct BestOf {
  double ade_m = 0.0;
  double fde_m = 0.0;
  int index = 0;  // candidate minimizing ade + fde; ties keep the lowest index
};

// Best-of-n displacement errors for one vessel. ADE averages the haversine
// distance over the predicted steps, FDE takes the final step; both are read
// from the single candidate minimizing their sum.
BestOf best_of_candidates(const std::vector<std::vector<Point>>& candidates,
                          std::span<const Point> ground_truth);

struct ScenarioScore {
  std::string path;
  double ade_m = 0.0;  // per-vessel mean within the scenario
  double fde_m = 0.0;
  int vessels = 0;
};

struct MetricReport {
  double ade_m = 0.0;  // dataset per-vessel means
  double fde_m = 0.0;
  int vessels = 0;
  int n = 0, k = 0;
  std::uint64_t seed = 0;
  std::vector<ScenarioScore> scenarios;
  std::vector<std::string> missing;  // unreadable scenario files

  bool empty() const { return vessels == 0; }
  nlohmann::json to_json() const;
  std::string to_table() const;
};

// Prior-sampling inference over every scenario file, best-of-n scoring
// against the stored futures. Files are processed in sorted order with
// per-scenario derived seeds; unreadable files are recorded, not fatal.
MetricReport evaluate_dataset(const Model& model, std::vector<std::string> scenario_files, int n,
                              int k, std::uint64_t seed);

}  // namespace dimtp
