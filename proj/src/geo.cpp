#include "dimtp/geo.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "dimtp/common.hpp"

namespace dimtp {

namespace {
constexpr double kDeg2Rad = M_PI / 180.0;

double sq(double x) { return x * x; }
}  // namespace

bool Point::valid() const {
  return std::isfinite(lon) && std::isfinite(lat) && lon >= -180.0 && lon <= 180.0 &&
         lat >= -90.0 && lat <= 90.0;
}

void Trajectory::validate() const {
  if (points.empty()) throw std::invalid_argument("trajectory must have at least one point");
  if (!(dt > 0.0)) throw std::invalid_argument("trajectory dt must be positive");
  for (const Point& p : points) {
    if (!p.valid()) throw std::invalid_argument("trajectory contains an invalid point");
  }
}

Scenario Scenario::head(std::size_t n_steps) const {
  Scenario out;
  out.trajectories.reserve(trajectories.size());
  for (const Trajectory& t : trajectories) {
    Trajectory h = t;
    h.points.resize(std::min(n_steps, t.points.size()));
    out.trajectories.push_back(std::move(h));
  }
  return out;
}

void Scenario::validate() const {
  if (trajectories.empty()) throw std::invalid_argument("scenario must contain a trajectory");
  std::set<std::string> ids;
  const Trajectory& ref = trajectories.front();
  for (const Trajectory& t : trajectories) {
    t.validate();
    if (t.t0 != ref.t0 || t.dt != ref.dt || t.points.size() != ref.points.size()) {
      throw std::invalid_argument("scenario trajectories must share t0, dt and length");
    }
    if (!ids.insert(t.mmsi).second) {
      throw std::invalid_argument("scenario contains duplicate mmsi " + t.mmsi);
    }
  }
}

void EncounterMask::set_pair(std::size_t i, std::size_t j, std::uint8_t v) {
  bits_[i * m_ + j] = v;
  bits_[j * m_ + i] = v;
}

double haversine_m(const Point& a, const Point& b) {
  if (!a.valid() || !b.valid()) throw std::invalid_argument("haversine_m: invalid point");
  const double lat1 = a.lat * kDeg2Rad;
  const double lat2 = b.lat * kDeg2Rad;
  const double dlat = (b.lat - a.lat) * kDeg2Rad;
  const double dlon = (b.lon - a.lon) * kDeg2Rad;
  const double h = sq(std::sin(dlat / 2.0)) + std::cos(lat1) * std::cos(lat2) * sq(std::sin(dlon / 2.0));
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

Vec2 local_offset_m(const Point& a, const Point& b) {
  const double mid_lat = 0.5 * (a.lat + b.lat);
  const double east = haversine_m({a.lon, mid_lat}, {b.lon, mid_lat});
  const double north = haversine_m({a.lon, a.lat}, {a.lon, b.lat});
  return {b.lon >= a.lon ? east : -east, b.lat >= a.lat ? north : -north};
}

Vec2 estimate_velocity(const Trajectory& traj) {
  if (traj.points.size() < 2) {
    throw InsufficientDataError("estimate_velocity: need at least two points");
  }
  const Point& p0 = traj.points[traj.points.size() - 2];
  const Point& p1 = traj.points.back();
  const Vec2 off = local_offset_m(p0, p1);
  return {off.east / traj.dt, off.north / traj.dt};
}

CpaResult cpa(const Point& pos_i, const Vec2& vel_i, const Point& pos_j, const Vec2& vel_j) {
  const Vec2 p = local_offset_m(pos_i, pos_j);
  const Vec2 v{vel_j.east - vel_i.east, vel_j.north - vel_i.north};
  const double v2 = sq(v.east) + sq(v.north);
  double tcpa_s = 0.0;
  if (v2 >= 1e-12) {  // |v| >= 1e-6 m/s
    tcpa_s = -(p.east * v.east + p.north * v.north) / v2;
  }
  const double dcpa_m = std::hypot(p.east + tcpa_s * v.east, p.north + tcpa_s * v.north);
  return {tcpa_s / 3600.0, dcpa_m / kMetersPerNauticalMile};
}

EncounterMask compute_encounter_mask(const Scenario& observed, const EncounterThresholds& thr) {
  const std::size_t m = observed.size();
  EncounterMask mask(m);

  std::vector<Point> pos(m);
  std::vector<Vec2> vel(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Trajectory& t = observed.trajectories[i];
    if (t.points.size() < 2) {
      throw InsufficientDataError("compute_encounter_mask: trajectory " + t.mmsi +
                                  " has fewer than two observed points");
    }
    pos[i] = t.points.back();
    vel[i] = estimate_velocity(t);
  }

  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const CpaResult c = cpa(pos[i], vel[i], pos[j], vel[j]);
      const bool hit = c.tcpa_hours >= thr.tcpa_min_h && c.tcpa_hours <= thr.tcpa_max_h &&
                       c.dcpa_nm >= thr.dcpa_min_nm && c.dcpa_nm <= thr.dcpa_max_nm;
      mask.set_pair(i, j, hit ? 1 : 0);
    }
  }
  return mask;
}

}  // namespace dimtp
