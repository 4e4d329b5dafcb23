#include "dimtp/scenario_io.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace dimtp {

using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace

json scenario_to_json(const Scenario& sc, int observed_len, int predicted_len) {
  json j;
  j["dt"] = sc.dt();
  j["t0"] = sc.t0();
  j["L_o"] = observed_len;
  j["L_p"] = predicted_len;
  json trajs = json::array();
  for (const Trajectory& tr : sc.trajectories) {
    json points = json::array();
    for (const Point& p : tr.points) points.push_back(json::array({p.lon, p.lat}));
    trajs.push_back(json{{"mmsi", tr.mmsi}, {"points", std::move(points)}});
  }
  j["trajectories"] = std::move(trajs);
  return j;
}

Scenario scenario_from_json(const json& j) {
  Scenario sc;
  const double dt = j.at("dt");
  const double t0 = j.at("t0");
  for (const json& tj : j.at("trajectories")) {
    Trajectory tr;
    tr.mmsi = tj.at("mmsi");
    tr.dt = dt;
    tr.t0 = t0;
    for (const json& pj : tj.at("points")) {
      tr.points.push_back({pj.at(0).get<double>(), pj.at(1).get<double>()});
    }
    sc.trajectories.push_back(std::move(tr));
  }
  sc.validate();
  return sc;
}

void write_scenario_file(const std::string& path, const Scenario& sc, int observed_len,
                         int predicted_len) {
  write_json_file(path, scenario_to_json(sc, observed_len, predicted_len));
}

Scenario read_scenario_file(const std::string& path) {
  return scenario_from_json(read_json_file(path));
}

json mask_to_json(const EncounterMask& mask) {
  json rows = json::array();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < mask.size(); ++j) row.push_back(static_cast<int>(mask.at(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

EncounterMask mask_from_json(const json& j) {
  const std::size_t m = j.size();
  EncounterMask mask(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < m; ++c) {
      if (j.at(i).at(c).get<int>() != 0) mask.set_pair(i, c, 1);
    }
  }
  return mask;
}

void write_index_file(const std::string& path, const std::vector<IndexEntry>& entries,
                      const json& config) {
  json j;
  j["config"] = config;
  json list = json::array();
  for (const IndexEntry& e : entries) {
    list.push_back(json{{"path", e.path},
                        {"t0", e.t0},
                        {"m", e.vessels},
                        {"mask", mask_to_json(e.mask)}});
  }
  j["scenarios"] = std::move(list);
  write_json_file(path, j);
}

std::vector<IndexEntry> read_index_file(const std::string& path) {
  const json j = read_json_file(path);
  std::vector<IndexEntry> out;
  for (const json& e : j.at("scenarios")) {
    IndexEntry entry;
    entry.path = e.at("path");
    entry.t0 = e.value("t0", 0.0);
    entry.vessels = e.value("m", 0);
    if (e.contains("mask")) entry.mask = mask_from_json(e.at("mask"));
    out.push_back(std::move(entry));
  }
  return out;
}

void write_labels_file(const std::string& path, const std::vector<std::string>& scenario_paths,
                       const std::vector<std::vector<int>>& labels, const json& config) {
  if (scenario_paths.size() != labels.size()) {
    throw std::invalid_argument("write_labels_file: paths and labels must align");
  }
  json list = json::array();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    list.push_back(json{{"path", scenario_paths[i]}, {"labels", labels[i]}});
  }
  json doc{{"scenarios", std::move(list)}};
  if (!config.is_null() && !config.empty()) doc["config"] = config;
  write_json_file(path, doc);
}

std::vector<std::vector<int>> read_labels_file(const std::string& path,
                                               const std::vector<std::string>& scenario_paths) {
  const json j = read_json_file(path);
  std::map<std::string, std::vector<int>> by_path;
  for (const json& e : j.at("scenarios")) {
    by_path[e.at("path")] = e.at("labels").get<std::vector<int>>();
  }
  std::vector<std::vector<int>> out;
  for (const std::string& p : scenario_paths) {
    const std::string name = std::filesystem::path(p).filename().string();
    auto it = by_path.find(name);
    if (it == by_path.end()) it = by_path.find(p);
    if (it == by_path.end()) throw std::runtime_error("labels file has no entry for " + p);
    out.push_back(it->second);
  }
  return out;
}

json prediction_to_json(const ScenarioPrediction& pred, const Scenario& scenario,
                        int observed_len, const json& config) {
  json j;
  j["config"] = config;
  j["k"] = pred.k;
  j["n"] = pred.n;
  j["dt"] = scenario.dt();
  j["t0"] = scenario.t0();
  j["L_o"] = observed_len;

  json vessels = json::array();
  const int L = static_cast<int>(scenario.length());
  for (std::size_t i = 0; i < pred.vessels.size(); ++i) {
    const VesselPrediction& vp = pred.vessels[i];
    json vj;
    vj["mmsi"] = vp.mmsi;
    vj["branch_ids"] = vp.branch_ids;
    vj["branch_probs"] = vp.branch_probs;

    json observed = json::array();
    for (int t = 0; t < observed_len && t < L; ++t) {
      const Point& p = scenario.trajectories[i].points[t];
      observed.push_back(json::array({p.lon, p.lat}));
    }
    vj["observed"] = std::move(observed);
    if (L > observed_len) {
      json gt = json::array();
      for (int t = observed_len; t < L; ++t) {
        const Point& p = scenario.trajectories[i].points[t];
        gt.push_back(json::array({p.lon, p.lat}));
      }
      vj["ground_truth"] = std::move(gt);
    }

    json cands = json::array();
    for (const Candidate& c : vp.candidates) {
      json points = json::array();
      for (const Point& p : c.points) points.push_back(json::array({p.lon, p.lat}));
      cands.push_back(json{{"branch_id", c.branch_id},
                           {"branch_prob", c.branch_prob},
                           {"points", std::move(points)}});
    }
    vj["candidates"] = std::move(cands);
    vessels.push_back(std::move(vj));
  }
  j["vessels"] = std::move(vessels);
  return j;
}

void write_prediction_file(const std::string& path, const ScenarioPrediction& pred,
                           const Scenario& scenario, int observed_len, const json& config) {
  write_json_file(path, prediction_to_json(pred, scenario, observed_len, config));
}

std::vector<std::string> scenario_paths_from_index(const std::string& index_path) {
  const std::filesystem::path dir = std::filesystem::path(index_path).parent_path();
  std::vector<std::string> out;
  for (const IndexEntry& e : read_index_file(index_path)) {
    out.push_back((dir / e.path).string());
  }
  return out;
}

}  // namespace dimtp
