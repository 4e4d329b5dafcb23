#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "dimtp/geo.hpp"

namespace dimtp {

// Standalone SVG for a prediction document (see scenario_io): observed tracks
// solid orange, ground truth black, candidates dashed and colored per branch,
// stroke width scaled by branch probability.
std::string prediction_svg(const nlohmann::json& prediction);

// GeoJSON FeatureCollection of the same content for GIS tools.
nlohmann::json prediction_geojson(const nlohmann::json& prediction);

// Prototype trajectories as GeoJSON LineStrings.
nlohmann::json prototypes_geojson(const std::vector<std::vector<Point>>& prototypes);

}  // namespace dimtp
