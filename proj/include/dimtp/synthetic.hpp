#pragma once

#include <cstdint>
#include <vector>

#include "dimtp/geo.hpp"
#include "dimtp/preprocess.hpp"

namespace dimtp {

// Labeled multimodal traffic with known mode structure. Vessels follow one of
// `turn_deg.size()` heading programs (constant heading, then a turn of the
// configured angle after `turn_step`), run along two opposing corridors, and
// optionally converge on a shared meeting point so the TCPA/DCPA thresholds
// are met by construction.
struct SynthConfig {
  std::vector<double> turn_deg = {0.0, 40.0, -40.0};  // one entry per mode
  double turn_jitter_deg = 8.0;   // within-mode turn variation, uniform
  int turn_step = 3;              // heading change applied after this step
  double corridor_spread_deg = 6.0;
  int min_vessels = 1;
  int max_vessels = 3;
  double speed_min_kn = 8.0;
  double speed_max_kn = 14.0;
  double noise_std_deg = 0.0003;  // Gaussian positional noise per coordinate
  double encounter_fraction = 0.5;
  int observed_len = 6;
  int predicted_len = 12;
  double dt_s = 30.0;
  BoundingBox region = {-0.3, -0.3, 0.3, 0.3};
  std::uint64_t seed = 1;

  int total_len() const { return observed_len + predicted_len; }
};

struct SynthScenario {
  Scenario scenario;
  std::vector<int> labels;     // mode per vessel, aligned with trajectory order
  EncounterMask oracle_mask;   // intended encounter structure (noise-free CPA)
  bool encounter = false;
};

// Deterministic per-scenario derived seeds: the corpus is a pure function of
// the config.
std::vector<SynthScenario> generate_corpus(const SynthConfig& cfg, int count);

// Mode estimate from the heading change along a noise-free trajectory;
// recovers generator labels exactly at zero noise.
int nearest_template_label(const Trajectory& traj, const SynthConfig& cfg);

}  // namespace dimtp
