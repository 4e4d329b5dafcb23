#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dimtp {

inline constexpr double kEarthRadiusM = 6'371'000.0;
inline constexpr double kMetersPerNauticalMile = 1852.0;

struct Point {
  double lon = 0.0;  // degrees east, [-180, 180]
  double lat = 0.0;  // degrees north, [-90, 90]

  bool valid() const;
};

// Uniformly sampled vessel track: points[i] is the position at t0 + i * dt.
struct Trajectory {
  std::string mmsi;
  double t0 = 0.0;  // epoch seconds
  double dt = 30.0; // sampling interval, seconds
  std::vector<Point> points;

  std::size_t length() const { return points.size(); }
  void validate() const;  // throws std::invalid_argument
};

// Co-temporal set of trajectories on a shared time grid.
struct Scenario {
  std::vector<Trajectory> trajectories;

  std::size_t size() const { return trajectories.size(); }
  std::size_t length() const { return trajectories.empty() ? 0 : trajectories.front().length(); }
  double t0() const { return trajectories.empty() ? 0.0 : trajectories.front().t0; }
  double dt() const { return trajectories.empty() ? 30.0 : trajectories.front().dt; }

  // First n_steps of every trajectory.
  Scenario head(std::size_t n_steps) const;

  // Shared grid, equal lengths, distinct mmsi. Throws std::invalid_argument.
  void validate() const;
};

// Symmetric m x m binary matrix with zero diagonal flagging risk pairs.
class EncounterMask {
 public:
  EncounterMask() = default;
  explicit EncounterMask(std::size_t m) : m_(m), bits_(m * m, 0) {}

  std::size_t size() const { return m_; }
  std::uint8_t at(std::size_t i, std::size_t j) const { return bits_[i * m_ + j]; }
  void set_pair(std::size_t i, std::size_t j, std::uint8_t v);

 private:
  std::size_t m_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct Vec2 {
  double east = 0.0;   // meters or meters-per-second, context dependent
  double north = 0.0;
};

struct CpaResult {
  double tcpa_hours = 0.0;
  double dcpa_nm = 0.0;
};

struct EncounterThresholds {
  double tcpa_min_h = -0.3;
  double tcpa_max_h = 0.8;
  double dcpa_min_nm = 0.0;
  double dcpa_max_nm = 2.0;
};

/// Great-circle distance in meters (haversine, spherical Earth).
double haversine_m(const Point& a, const Point& b);

// Signed flat-frame displacement from `a` to `b`: east along the parallel at
// the mean latitude, north along the meridian. Accurate to well under 1% at
// encounter ranges; not meant for long baselines.
Vec2 local_offset_m(const Point& a, const Point& b);

/// Velocity in m/s from the last two points of a uniformly sampled track.
/// Throws InsufficientDataError on single-point trajectories.
Vec2 estimate_velocity(const Trajectory& traj);

// Closest point of approach of j relative to i under constant velocities.
// Relative speeds below 1e-6 m/s are treated as "currently at CPA":
// tcpa = 0 and dcpa is the present separation.
CpaResult cpa(const Point& pos_i, const Vec2& vel_i, const Point& pos_j, const Vec2& vel_j);

// Pairwise TCPA/DCPA screening over the (observed) scenario. Positions are
// taken at each trajectory's last point, velocities from its last two points.
// Symmetric with zero diagonal by construction.
EncounterMask compute_encounter_mask(const Scenario& observed,
                                     const EncounterThresholds& thr = {});

}  // namespace dimtp
