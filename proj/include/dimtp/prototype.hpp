#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dimtp/geo.hpp"
#include "dimtp/model.hpp"
#include "dimtp/tensor.hpp"

namespace dimtp {

// Trajectories split into normalized start points and zero-based shapes, so
// clustering sees route shape separately from location. `targets` keeps the
// absolute normalized coordinates the decoder reconstructs.
struct DecoupledHistory {
  te::Tensor start_points;  // [m, 2]
  te::Tensor rel_shapes;    // [m, L*2], first pair exactly (0, 0)
  te::Tensor targets;       // [m, L*2]
  int count = 0;
};

DecoupledHistory decouple(std::span<const Trajectory> trajectories, const CoordNormalizer& norm,
                          int expected_len);

struct KmeansResult {
  std::vector<float> centroids;         // [k, dim]
  std::vector<int> assignment;          // [n]
  std::vector<double> inertia_history;  // one entry per assignment pass
  int iterations = 0;
};

// Lloyd iterations from k-means++ seeds until the assignment reaches a
// fixpoint or max_iter passes. Ties go to the lower centroid index; clusters
// that empty out keep their previous centroid.
KmeansResult kmeans(std::span<const float> points, int n, int dim, int k, std::uint64_t seed,
                    int max_iter = 300);

// Latent code per trajectory: history encoding of the relative shape
// concatenated with the start point; [m, d+2]. Pure evaluation.
std::vector<float> encode_history(const Model& model, const DecoupledHistory& hist);

struct AutoencoderReport {
  std::vector<float> loss_per_epoch;  // mean squared reconstruction error
};

// Full-batch Adam on the reconstruction error of the history autoencoder.
AutoencoderReport train_autoencoder(Model& model, const DecoupledHistory& hist, int epochs,
                                    float base_lr, std::span<const int> milestones);

// Cluster latent codes, decode the centroids, and freeze both into the model.
// Requires at least as many trajectories as clusters.
void extract_prototypes(Model& model, const DecoupledHistory& hist, std::uint64_t seed);

// Nearest-centroid label per trajectory via the same encoding path.
// Requires fitted prototypes.
std::vector<int> assign_labels(const Model& model, std::span<const Trajectory> trajectories);

// Prototype trajectories in degrees, for export and inspection.
std::vector<std::vector<Point>> decode_prototypes_deg(const Model& model);

}  // namespace dimtp
