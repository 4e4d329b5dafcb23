#pragma once

#include <vector>

#include "dimtp/geo.hpp"
#include "dimtp/model.hpp"
#include "dimtp/tensor.hpp"

namespace dimtp {

// Row-wise encoding of the observed slice (length L_o required): [m, d].
te::Tensor encode_observed(const Model& model, const Scenario& observed);

// Row-wise encoding of the frozen prototype set: [C, d].
te::Tensor encode_prototypes(const Model& model);

// Prototype match probabilities per vessel, softmax((Q z_o)(K z_i)^T / sqrt(d))
// over the C prototypes: [m, C], rows on the simplex.
te::Tensor classify(const Model& model, const te::Tensor& z_obs, const te::Tensor& z_proto);

// Per-vessel top-k branches. Row (i*k + j) of `branches` is z_obs[i] joined
// with the encoding of vessel i's j-th ranked prototype (width 2d).
struct IntentionTree {
  int vessels = 0;
  int k = 0;
  std::vector<int> branch_ids;       // [m*k] prototype indices, probability-ranked
  std::vector<float> branch_probs;   // [m*k] renormalized to sum 1 per vessel
  te::Tensor branches;               // [m*k, 2d]
};

// Ties in probability break toward the lower prototype index.
IntentionTree build_tree(const te::Tensor& z_obs, const te::Tensor& z_proto,
                         const te::Tensor& probs, int k);

// Training-time tree: one branch per vessel, forced to the ground-truth label.
IntentionTree build_forced_tree(const te::Tensor& z_obs, const te::Tensor& z_proto,
                                const std::vector<int>& labels);

}  // namespace dimtp
