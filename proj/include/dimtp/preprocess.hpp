#pragma once

#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dimtp/geo.hpp"

namespace dimtp {

struct AisRecord {
  std::string mmsi;
  double timestamp = 0.0;  // epoch seconds
  double lon = 0.0;
  double lat = 0.0;
  std::optional<double> sog;  // knots
  std::optional<double> cog;  // degrees

  bool valid() const;
};

struct BoundingBox {
  double lon_min = -180.0;
  double lat_min = -90.0;
  double lon_max = 180.0;
  double lat_max = 90.0;

  bool contains(double lon, double lat) const {
    return lon >= lon_min && lon <= lon_max && lat >= lat_min && lat <= lat_max;
  }
};

struct PipelineConfig {
  BoundingBox region;
  double gap_threshold_s = 600.0;
  int min_points = 20;
  double resample_dt_s = 30.0;
  int observed_len = 6;    // L_o
  int predicted_len = 12;  // L_p

  int scenario_len() const { return observed_len + predicted_len; }
  double window_s() const { return scenario_len() * resample_dt_s; }
};

// Gap-free stretch of one vessel's track; timestamps strictly increase.
struct Segment {
  std::string mmsi;
  std::vector<double> t;
  std::vector<Point> p;

  std::size_t size() const { return t.size(); }
};

struct CsvResult {
  std::vector<AisRecord> records;
  int rejected = 0;  // malformed lines
};

struct TrackExtraction {
  std::map<std::string, std::vector<AisRecord>> tracks;  // keyed by mmsi, time-sorted
  int rejected = 0;  // records failing field validation
};

// Header `mmsi,timestamp,lon,lat,sog,cog`; sog/cog may be blank. Malformed
// lines are counted, never fatal.
CsvResult read_ais_csv(std::istream& in);
CsvResult read_ais_csv_file(const std::string& path);

// Group by mmsi, sort by timestamp, collapse duplicate (mmsi, timestamp) pairs
// to the first occurrence in input order, then drop points outside `region`.
TrackExtraction extract_tracks(const std::vector<AisRecord>& records, const BoundingBox& region);

// Split where consecutive timestamps differ by more than gap_threshold_s and
// discard pieces shorter than min_points.
std::vector<Segment> segment_track(const std::vector<AisRecord>& track, double gap_threshold_s,
                                   int min_points);

// Independent not-a-knot cubic splines through lon(t) and lat(t), evaluated on
// the global grid {j * dt_s}: from the first grid time >= t.front() to the
// last grid time <= t.back(). Grid times are epoch-aligned so that segments of
// different vessels land on a shared time base (a scenario requires one grid).
// For on-grid input the grid spans exactly first..last timestamp and the grid
// endpoints interpolate the input exactly.
// Throws InsufficientDataError for segments with fewer than 4 points; returns
// nullopt when no grid point falls inside the segment's time span.
std::optional<Trajectory> resample_segment(const Segment& seg, double dt_s);

// Tile the absolute time axis with consecutive windows of L*dt seconds
// (window w covers grid steps [w*L, (w+1)*L)) and emit one scenario per
// window that at least one trajectory fully spans. Vessels not covering the
// whole window are left out of that scenario. Trajectories within a scenario
// are ordered by mmsi; scenarios by start time.
std::vector<Scenario> build_scenarios(const std::vector<Trajectory>& resampled, int scenario_len);

struct PipelineOutput {
  std::vector<Scenario> scenarios;
  std::vector<EncounterMask> masks;  // from each scenario's observed slice
  int rejected_records = 0;
  int short_segments = 0;  // segments dropped at the resampling stage
};

// Full chain: extract -> segment -> resample -> window -> mask.
PipelineOutput run_pipeline(const std::vector<AisRecord>& records, const PipelineConfig& cfg);

}  // namespace dimtp
