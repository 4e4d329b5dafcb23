#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dimtp/geo.hpp"
#include "dimtp/intention.hpp"
#include "dimtp/model.hpp"
#include "dimtp/rng.hpp"
#include "dimtp/tensor.hpp"

namespace dimtp {

// Diagonal Gaussian over the latent per (vessel, branch) row; sigma is
// parameterized as log-variance.
struct LatentDistribution {
  te::Tensor mu;       // [m*k, latent]
  te::Tensor log_var;  // [m*k, latent]
};

// Posterior parameters from the ground-truth destinations (training path).
// `dest_norm` holds normalized coordinates, one row per vessel.
LatentDistribution encode_latent(const Model& model, const te::Tensor& dest_norm,
                                 const IntentionTree& tree);

// Prior draw z ~ N(0, epsilon I), one row per (vessel, branch, sample) in that
// order. Streams are keyed by (seed, vessel, branch position), so the sample
// set for a smaller per-branch count or a smaller k is a prefix of a larger
// one - evaluation with nested candidate sets relies on this.
te::Tensor sample_prior(const Model& model, int vessels, int k, int per_branch,
                        std::uint64_t seed);

// Reparameterized posterior draw mu + exp(log_var / 2) * eta with eta drawn
// from `rng`; gradient flows into mu and log_var.
te::Tensor sample_posterior(const LatentDistribution& dist, Rng& rng);

// Destination decode of latent rows joined with their branch encodings.
// `branch_rows[r]` maps latent row r to its row in tree.branches.
te::Tensor decode_destination(const Model& model, const te::Tensor& z,
                              const IntentionTree& tree, const std::vector<int>& branch_rows);

// Fused feature z' = branches (+) E_d(destinations): [rows, 3d].
te::Tensor fuse_features(const Model& model, const IntentionTree& tree,
                         const std::vector<int>& branch_rows, const te::Tensor& dest_hat);

// Masked attention across the vessel axis, applied independently per
// (branch, sample) slice and repeated `cfg.depth` times with a residual add.
// Pairs with mask zero never exchange information; self-attention is always
// permitted. Throws when the mask extent differs from `vessels`.
te::Tensor attention_stack(const Model& model, const te::Tensor& fused, const EncounterMask& mask,
                           int vessels, int k, int per_branch);

// Trajectory head: [rows, 3d] -> [rows, L_p*2] in normalized coordinates.
te::Tensor decode_paths(const Model& model, const te::Tensor& fused);

// Row index of (vessel, branch) repeated per sample; see decode_destination.
std::vector<int> repeat_branch_rows(int vessels, int k, int per_branch);

struct Candidate {
  int branch_id = 0;
  float branch_prob = 0.0f;
  std::vector<Point> points;  // L_p predicted positions, degrees
};

struct VesselPrediction {
  std::string mmsi;
  std::vector<int> branch_ids;
  std::vector<float> branch_probs;
  std::vector<Candidate> candidates;  // n = k * (n/k), branch-major
};

struct ScenarioPrediction {
  std::vector<VesselPrediction> vessels;
  int k = 0;
  int n = 0;
};

// End-to-end inference on one observed scenario: intention tree from the
// classifier, n/k prior samples per branch, destination decode, masked
// attention, trajectory decode, denormalization. Pure given (model, seed).
ScenarioPrediction predict_scenario(const Model& model, const Scenario& observed,
                                    const EncounterMask& mask, int k, int n, std::uint64_t seed);

}  // namespace dimtp
