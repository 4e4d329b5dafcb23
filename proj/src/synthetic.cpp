#include "dimtp/synthetic.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "dimtp/rng.hpp"

namespace dimtp {

namespace {

constexpr double kMetersPerDegLat = 111194.92664455873;
constexpr double kDeg2Rad = M_PI / 180.0;

struct HeadingProgram {
  double heading0_deg = 0.0;
  double turn_deg = 0.0;
  int turn_step = 3;
  double speed_mps = 5.0;
};

// Noise-free integration from `origin`; segment s uses the post-turn heading
// once s >= turn_step.
std::vector<Point> integrate(const HeadingProgram& prog, Point origin, int steps, double dt) {
  std::vector<Point> pts{origin};
  for (int s = 0; s < steps - 1; ++s) {
    const double h = (prog.heading0_deg + (s >= prog.turn_step ? prog.turn_deg : 0.0)) * kDeg2Rad;
    const Point& cur = pts.back();
    const double north = prog.speed_mps * dt * std::cos(h) / kMetersPerDegLat;
    const double east =
        prog.speed_mps * dt * std::sin(h) / (kMetersPerDegLat * std::cos(cur.lat * kDeg2Rad));
    pts.push_back({cur.lon + east, cur.lat + north});
  }
  return pts;
}

bool mask_matches_intent(const EncounterMask& mask, bool encounter) {
  for (std::size_t i = 0; i < mask.size(); ++i) {
    for (std::size_t j = i + 1; j < mask.size(); ++j) {
      if ((mask.at(i, j) != 0) != encounter) return false;
    }
  }
  return true;
}

}  // namespace

std::vector<SynthScenario> generate_corpus(const SynthConfig& cfg, int count) {
  if (cfg.turn_deg.size() < 2) throw std::invalid_argument("synth: need at least two modes");
  if (cfg.noise_std_deg < 0) throw std::invalid_argument("synth: noise must be non-negative");
  if (cfg.min_vessels < 1 || cfg.max_vessels < cfg.min_vessels) {
    throw std::invalid_argument("synth: bad vessel range");
  }

  const int L = cfg.total_len();
  const int modes = static_cast<int>(cfg.turn_deg.size());
  std::vector<SynthScenario> corpus;
  corpus.reserve(count);

  for (int idx = 0; idx < count; ++idx) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(idx)));
    const bool want_encounter =
        cfg.max_vessels >= 2 && rng.uniform() < cfg.encounter_fraction;
    const int m = want_encounter ? rng.uniform_int(2, cfg.max_vessels)
                                 : rng.uniform_int(cfg.min_vessels, cfg.max_vessels);

    SynthScenario out;
    out.encounter = want_encounter;
    for (int attempt = 0; attempt < 10; ++attempt) {
      Scenario sc;
      std::vector<int> labels;
      const double widen = 1.0 + 0.3 * attempt;

      const double meet_lon = rng.uniform(-0.08, 0.08);
      const double meet_lat = rng.uniform(-0.08, 0.08);
      const int meet_step = cfg.observed_len + 1 + rng.uniform_int(0, 2);

      for (int v = 0; v < m; ++v) {
        HeadingProgram prog;
        const bool northbound = v % 2 == 0;
        prog.heading0_deg = (northbound ? 0.0 : 180.0) +
                            rng.uniform(-cfg.corridor_spread_deg / 2, cfg.corridor_spread_deg / 2);
        const int mode = rng.uniform_int(0, modes - 1);
        prog.turn_deg =
            cfg.turn_deg[mode] + rng.uniform(-cfg.turn_jitter_deg, cfg.turn_jitter_deg);
        prog.turn_step = cfg.turn_step;
        prog.speed_mps = rng.uniform(cfg.speed_min_kn, cfg.speed_max_kn) * 1852.0 / 3600.0;

        Point start;
        if (want_encounter) {
          // Translate the path so vessel v crosses the meeting point at
          // meet_step (the third vessel one step later).
          const int vessel_meet = meet_step + (v >= 2 ? 1 : 0);
          const std::vector<Point> profile = integrate(prog, {0.0, 0.0}, L, cfg.dt_s);
          start = {meet_lon - profile[vessel_meet].lon, meet_lat - profile[vessel_meet].lat};
        } else {
          // Separate lanes; lateral spacing keeps every pair outside the
          // DCPA threshold.
          const double slot = (v - (m - 1) / 2.0) * 0.09 * widen;
          start = {slot + rng.uniform(-0.005, 0.005),
                   (northbound ? -0.06 : 0.06) + rng.uniform(-0.02, 0.02)};
        }

        Trajectory tr;
        tr.mmsi = std::to_string(100000000 + idx * 10 + v);
        tr.dt = cfg.dt_s;
        tr.t0 = static_cast<double>(idx) * L * cfg.dt_s;
        tr.points = integrate(prog, start, L, cfg.dt_s);
        sc.trajectories.push_back(std::move(tr));
        labels.push_back(mode);
      }

      const EncounterMask mask = compute_encounter_mask(sc.head(cfg.observed_len));
      if (mask_matches_intent(mask, want_encounter) || attempt == 9) {
        out.scenario = std::move(sc);
        out.labels = std::move(labels);
        out.oracle_mask = mask;
        break;
      }
    }

    if (cfg.noise_std_deg > 0) {
      for (Trajectory& tr : out.scenario.trajectories) {
        for (Point& p : tr.points) {
          p.lon += cfg.noise_std_deg * rng.normal();
          p.lat += cfg.noise_std_deg * rng.normal();
        }
      }
    }
    out.scenario.validate();
    corpus.push_back(std::move(out));
  }
  return corpus;
}

int nearest_template_label(const Trajectory& traj, const SynthConfig& cfg) {
  if (traj.length() < 2) throw std::invalid_argument("nearest_template_label: track too short");
  auto heading_deg = [](const Point& a, const Point& b) {
    const Vec2 off = local_offset_m(a, b);
    return std::atan2(off.east, off.north) / kDeg2Rad;
  };
  const double h0 = heading_deg(traj.points[0], traj.points[1]);
  const double h1 = heading_deg(traj.points[traj.length() - 2], traj.points.back());
  double turn = h1 - h0;
  while (turn > 180.0) turn -= 360.0;
  while (turn < -180.0) turn += 360.0;

  int best = 0;
  double best_err = std::abs(turn - cfg.turn_deg[0]);
  for (std::size_t mode = 1; mode < cfg.turn_deg.size(); ++mode) {
    const double err = std::abs(turn - cfg.turn_deg[mode]);
    if (err < best_err) {
      best_err = err;
      best = static_cast<int>(mode);
    }
  }
  return best;
}

}  // namespace dimtp
