#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dimtp/geo.hpp"
#include "dimtp/model.hpp"
#include "dimtp/predictor.hpp"
#include "dimtp/tensor.hpp"

namespace dimtp {

struct LossWeights {
  float lambda_clf = 1.0f;
  float lambda_cvae = 1.0f;
  float lambda_reg = 1.0f;
  float alpha = 0.01f;  // destination term inside the CVAE loss
};

// Mean over vessels of -log p[i, label_i]; probabilities clamped at 1e-12.
te::Tensor loss_classification(const te::Tensor& probs, const std::vector<int>& labels);

// KL(N(mu, diag(exp(log_var))) || N(0, epsilon I)) summed over latent
// dimensions and averaged over rows, plus alpha * mean squared destination
// error.
te::Tensor loss_cvae(const LatentDistribution& dist, const te::Tensor& dest_hat,
                     const te::Tensor& dest_gt, float alpha, float epsilon);

// Sum over vessels of the mean squared coordinate error (normalized units)
// across the predicted steps.
te::Tensor loss_regression(const te::Tensor& pred, const te::Tensor& gt);

struct TrainOptions {
  int epochs = 500;
  float lr = 1e-4f;
  std::vector<int> milestones = {160, 300};
  LossWeights weights;
  std::uint64_t seed = 1;
};

struct Stage1Result {
  std::vector<float> loss_per_epoch;
  std::vector<int> labels;  // cluster label per history trajectory
};

// Autoencoder training, prototype extraction, and label assignment over the
// flattened history set; prototypes and centroids are frozen into the model.
Stage1Result train_stage1(Model& model, const std::vector<Scenario>& history,
                          const TrainOptions& opts);

struct EpochStats {
  int epoch = 0;
  float lr = 0.0f;
  float clf = 0.0f, cvae = 0.0f, reg = 0.0f, total = 0.0f;  // per-scenario means
  double seconds = 0.0;
};

struct Stage2Result {
  std::vector<EpochStats> epochs;

  std::string to_csv() const;
};

// One Adam step per scenario with the teacher-forced branch (ground-truth
// label, single posterior sample), weighted total loss, and the multi-step
// schedule. The history autoencoder stays frozen. Requires stage-1 artifacts.
Stage2Result train_stage2(Model& model, const std::vector<Scenario>& scenarios,
                          const std::vector<EncounterMask>& masks,
                          const std::vector<std::vector<int>>& labels, const TrainOptions& opts);

// Ground-truth labels for stage 2: assign_labels over each scenario's
// trajectories, grouped per scenario.
std::vector<std::vector<int>> label_scenarios(const Model& model,
                                              const std::vector<Scenario>& scenarios);

}  // namespace dimtp
