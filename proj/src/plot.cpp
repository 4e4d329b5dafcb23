#include "dimtp/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace dimtp {

using nlohmann::json;

namespace {

const char* kBranchColors[] = {"#d62728", "#2ca02c", "#1f77b4",
                               "#9467bd", "#8c564b", "#e377c2"};

struct Viewport {
  double lon_min = std::numeric_limits<double>::max();
  double lat_min = std::numeric_limits<double>::max();
  double lon_max = std::numeric_limits<double>::lowest();
  double lat_max = std::numeric_limits<double>::lowest();
  double width = 900, height = 700, margin = 40;

  void grow(const json& points) {
    for (const json& p : points) {
      lon_min = std::min(lon_min, p.at(0).get<double>());
      lon_max = std::max(lon_max, p.at(0).get<double>());
      lat_min = std::min(lat_min, p.at(1).get<double>());
      lat_max = std::max(lat_max, p.at(1).get<double>());
    }
  }

  void finalize() {
    if (lon_max <= lon_min) lon_max = lon_min + 1e-6;
    if (lat_max <= lat_min) lat_max = lat_min + 1e-6;
  }

  double x(double lon) const {
    return margin + (lon - lon_min) / (lon_max - lon_min) * (width - 2 * margin);
  }
  double y(double lat) const {  // lat grows upward
    return height - margin - (lat - lat_min) / (lat_max - lat_min) * (height - 2 * margin);
  }
};

std::string polyline(const Viewport& vp, const json& points, const std::string& color,
                     double stroke_width, bool dashed, double opacity = 1.0) {
  std::string d;
  char buf[64];
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%c%.2f,%.2f", i == 0 ? 'M' : 'L',
                  vp.x(points[i].at(0).get<double>()), vp.y(points[i].at(1).get<double>()));
    d += buf;
  }
  std::string attrs = "fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" +
                      std::to_string(stroke_width) + "\" stroke-opacity=\"" +
                      std::to_string(opacity) + "\"";
  if (dashed) attrs += " stroke-dasharray=\"6,4\"";
  return "  <path d=\"" + d + "\" " + attrs + "/>\n";
}

}  // namespace

std::string prediction_svg(const json& prediction) {
  Viewport vp;
  for (const json& v : prediction.at("vessels")) {
    vp.grow(v.at("observed"));
    if (v.contains("ground_truth")) vp.grow(v.at("ground_truth"));
    for (const json& c : v.at("candidates")) vp.grow(c.at("points"));
  }
  vp.finalize();

  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string((int)vp.width) +
      "\" height=\"" + std::to_string((int)vp.height) + "\">\n" +
      "  <rect width=\"100%\" height=\"100%\" fill=\"#fbfbf8\"/>\n";

  for (const json& v : prediction.at("vessels")) {
    for (const json& c : v.at("candidates")) {
      const int branch = c.at("branch_id").get<int>();
      const double prob = c.at("branch_prob").get<double>();
      const char* color = kBranchColors[branch % 6];
      svg += polyline(vp, c.at("points"), color, 0.8 + 2.2 * prob, true, 0.75);
    }
  }
  for (const json& v : prediction.at("vessels")) {
    svg += polyline(vp, v.at("observed"), "#e0a200", 2.2, false);
    if (v.contains("ground_truth")) svg += polyline(vp, v.at("ground_truth"), "#000000", 2.0, false);
  }

  // Legend
  double ly = 18;
  auto legend = [&](const std::string& color, const std::string& label, bool dashed) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "  <line x1=\"12\" y1=\"%.0f\" x2=\"44\" y2=\"%.0f\" stroke=\"%s\" "
                  "stroke-width=\"2.5\"%s/>\n  <text x=\"50\" y=\"%.0f\" font-size=\"12\" "
                  "font-family=\"sans-serif\">%s</text>\n",
                  ly, ly, color.c_str(), dashed ? " stroke-dasharray=\"6,4\"" : "", ly + 4,
                  label.c_str());
    svg += buf;
    ly += 18;
  };
  legend("#e0a200", "observed", false);
  legend("#000000", "ground truth", false);
  std::vector<int> branches;
  for (const json& v : prediction.at("vessels")) {
    for (const json& b : v.at("branch_ids")) {
      const int id = b.get<int>();
      if (std::find(branches.begin(), branches.end(), id) == branches.end()) branches.push_back(id);
    }
  }
  std::sort(branches.begin(), branches.end());
  for (int b : branches) {
    legend(kBranchColors[b % 6], "intention " + std::to_string(b), true);
  }

  svg += "</svg>\n";
  return svg;
}

json prediction_geojson(const json& prediction) {
  json features = json::array();
  auto line = [](const json& points, json props) {
    return json{{"type", "Feature"},
                {"geometry", json{{"type", "LineString"}, {"coordinates", points}}},
                {"properties", std::move(props)}};
  };
  for (const json& v : prediction.at("vessels")) {
    const std::string mmsi = v.at("mmsi");
    features.push_back(line(v.at("observed"), json{{"role", "observed"}, {"mmsi", mmsi}}));
    if (v.contains("ground_truth")) {
      features.push_back(line(v.at("ground_truth"), json{{"role", "ground_truth"}, {"mmsi", mmsi}}));
    }
    for (const json& c : v.at("candidates")) {
      features.push_back(line(c.at("points"), json{{"role", "candidate"},
                                                   {"mmsi", mmsi},
                                                   {"branch_id", c.at("branch_id")},
                                                   {"branch_prob", c.at("branch_prob")}}));
    }
  }
  return json{{"type", "FeatureCollection"}, {"features", features}};
}

json prototypes_geojson(const std::vector<std::vector<Point>>& prototypes) {
  json features = json::array();
  for (std::size_t i = 0; i < prototypes.size(); ++i) {
    json coords = json::array();
    for (const Point& p : prototypes[i]) coords.push_back(json::array({p.lon, p.lat}));
    features.push_back(json{{"type", "Feature"},
                            {"geometry", json{{"type", "LineString"}, {"coordinates", coords}}},
                            {"properties", json{{"role", "prototype"}, {"id", i}}}});
  }
  return json{{"type", "FeatureCollection"}, {"features", features}};
}

}  // namespace dimtp
