#include "dimtp/preprocess.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dimtp/common.hpp"
#include "dimtp/spline.hpp"

namespace dimtp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  const auto res = std::from_chars(b, e, out);
  return res.ec == std::errc{} && res.ptr == e && std::isfinite(out);
}

}  // namespace

bool AisRecord::valid() const {
  return !mmsi.empty() && std::isfinite(timestamp) && timestamp >= 0.0 &&
         Point{lon, lat}.valid();
}

CsvResult read_ais_csv(std::istream& in) {
  CsvResult out;
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    if (!saw_header) {
      saw_header = true;
      // Tolerate but do not require the documented header line.
      if (trim(line).rfind("mmsi", 0) == 0) continue;
    }
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() < 4) {
      ++out.rejected;
      continue;
    }
    AisRecord r;
    r.mmsi = f[0];
    double sog = 0.0, cog = 0.0;
    if (r.mmsi.empty() || !parse_double(f[1], r.timestamp) || !parse_double(f[2], r.lon) ||
        !parse_double(f[3], r.lat)) {
      ++out.rejected;
      continue;
    }
    if (f.size() > 4 && !f[4].empty()) {
      if (!parse_double(f[4], sog)) {
        ++out.rejected;
        continue;
      }
      r.sog = sog;
    }
    if (f.size() > 5 && !f[5].empty()) {
      if (!parse_double(f[5], cog)) {
        ++out.rejected;
        continue;
      }
      r.cog = cog;
    }
    out.records.push_back(std::move(r));
  }
  return out;
}

CsvResult read_ais_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open AIS CSV: " + path);
  return read_ais_csv(in);
}

TrackExtraction extract_tracks(const std::vector<AisRecord>& records, const BoundingBox& region) {
  TrackExtraction out;
  for (const AisRecord& r : records) {
    if (!r.valid()) {
      ++out.rejected;
      continue;
    }
    out.tracks[r.mmsi].push_back(r);
  }
  for (auto& [mmsi, track] : out.tracks) {
    // Stable sort keeps input order among equal timestamps, so the duplicate
    // collapse below keeps the first record seen.
    std::stable_sort(track.begin(), track.end(),
                     [](const AisRecord& a, const AisRecord& b) { return a.timestamp < b.timestamp; });
    track.erase(std::unique(track.begin(), track.end(),
                            [](const AisRecord& a, const AisRecord& b) {
                              return a.timestamp == b.timestamp;
                            }),
                track.end());
    track.erase(std::remove_if(track.begin(), track.end(),
                               [&](const AisRecord& r) { return !region.contains(r.lon, r.lat); }),
                track.end());
  }
  std::erase_if(out.tracks, [](const auto& kv) { return kv.second.empty(); });
  return out;
}

std::vector<Segment> segment_track(const std::vector<AisRecord>& track, double gap_threshold_s,
                                   int min_points) {
  std::vector<Segment> out;
  Segment cur;
  auto flush = [&] {
    if (static_cast<int>(cur.size()) >= min_points) out.push_back(std::move(cur));
    cur = Segment{};
  };
  for (const AisRecord& r : track) {
    if (!cur.t.empty() && r.timestamp - cur.t.back() > gap_threshold_s) flush();
    if (cur.t.empty()) cur.mmsi = r.mmsi;
    cur.t.push_back(r.timestamp);
    cur.p.push_back({r.lon, r.lat});
  }
  flush();
  return out;
}

std::optional<Trajectory> resample_segment(const Segment& seg, double dt_s) {
  if (seg.size() < 4) {
    throw InsufficientDataError("resample_segment: segment " + seg.mmsi +
                                " has fewer than 4 points");
  }
  if (!(dt_s > 0.0)) throw std::invalid_argument("resample_segment: dt must be positive");

  const double eps = dt_s * 1e-9;
  const long long j0 = static_cast<long long>(std::ceil((seg.t.front() - eps) / dt_s));
  const long long j1 = static_cast<long long>(std::floor((seg.t.back() + eps) / dt_s));
  if (j1 < j0) return std::nullopt;

  std::vector<double> lon(seg.size()), lat(seg.size());
  for (std::size_t i = 0; i < seg.size(); ++i) {
    lon[i] = seg.p[i].lon;
    lat[i] = seg.p[i].lat;
  }
  const CubicSpline slon(seg.t, lon);
  const CubicSpline slat(seg.t, lat);

  Trajectory out;
  out.mmsi = seg.mmsi;
  out.dt = dt_s;
  out.t0 = static_cast<double>(j0) * dt_s;
  out.points.reserve(static_cast<std::size_t>(j1 - j0 + 1));
  for (long long j = j0; j <= j1; ++j) {
    const double t = static_cast<double>(j) * dt_s;
    out.points.push_back({slon(t), slat(t)});
  }
  return out;
}

std::vector<Scenario> build_scenarios(const std::vector<Trajectory>& resampled, int scenario_len) {
  std::vector<Scenario> out;
  if (resampled.empty() || scenario_len <= 0) return out;
  const double dt = resampled.front().dt;
  const long long L = scenario_len;

  long long w_min = 0, w_max = -1;
  bool first = true;
  for (const Trajectory& tr : resampled) {
    const long long i0 = std::llround(tr.t0 / dt);
    const long long i1 = i0 + static_cast<long long>(tr.length());  // one past
    // floor division for possibly negative indices
    const long long lo = i0 >= 0 ? i0 / L : -((-i0 + L - 1) / L);
    const long long hi = (i1 - 1) >= 0 ? (i1 - 1) / L : -((-(i1 - 1) + L - 1) / L);
    if (first) {
      w_min = lo;
      w_max = hi;
      first = false;
    } else {
      w_min = std::min(w_min, lo);
      w_max = std::max(w_max, hi);
    }
  }

  for (long long w = w_min; w <= w_max; ++w) {
    const long long W = w * L;
    Scenario sc;
    for (const Trajectory& tr : resampled) {
      const long long i0 = std::llround(tr.t0 / dt);
      const long long len = static_cast<long long>(tr.length());
      if (i0 <= W && i0 + len >= W + L) {
        Trajectory slice;
        slice.mmsi = tr.mmsi;
        slice.dt = dt;
        slice.t0 = static_cast<double>(W) * dt;
        const std::size_t off = static_cast<std::size_t>(W - i0);
        slice.points.assign(tr.points.begin() + off, tr.points.begin() + off + L);
        sc.trajectories.push_back(std::move(slice));
      }
    }
    if (sc.trajectories.empty()) continue;
    std::sort(sc.trajectories.begin(), sc.trajectories.end(),
              [](const Trajectory& a, const Trajectory& b) { return a.mmsi < b.mmsi; });
    out.push_back(std::move(sc));
  }
  return out;
}

PipelineOutput run_pipeline(const std::vector<AisRecord>& records, const PipelineConfig& cfg) {
  if (cfg.observed_len < 2 || cfg.predicted_len < 1) {
    throw std::invalid_argument("pipeline: observed_len >= 2 and predicted_len >= 1 required");
  }
  if (!(cfg.gap_threshold_s > 0.0) || cfg.min_points <= 0 || !(cfg.resample_dt_s > 0.0)) {
    throw std::invalid_argument("pipeline: thresholds must be positive");
  }

  PipelineOutput out;
  TrackExtraction tracks = extract_tracks(records, cfg.region);
  out.rejected_records = tracks.rejected;

  std::vector<Trajectory> resampled;
  for (const auto& [mmsi, track] : tracks.tracks) {
    for (const Segment& seg : segment_track(track, cfg.gap_threshold_s, cfg.min_points)) {
      try {
        if (auto tr = resample_segment(seg, cfg.resample_dt_s)) {
          resampled.push_back(std::move(*tr));
        } else {
          ++out.short_segments;
        }
      } catch (const InsufficientDataError&) {
        ++out.short_segments;
      }
    }
  }

  out.scenarios = build_scenarios(resampled, cfg.scenario_len());
  out.masks.reserve(out.scenarios.size());
  for (const Scenario& sc : out.scenarios) {
    out.masks.push_back(compute_encounter_mask(sc.head(cfg.observed_len)));
  }
  return out;
}

}  // namespace dimtp
