#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dimtp/checkpoint.hpp"
#include "dimtp/geo.hpp"
#include "dimtp/nn.hpp"
#include "dimtp/preprocess.hpp"
#include "dimtp/tensor.hpp"

namespace dimtp {

// Network and sampling dimensions. The defaults reproduce the reference
// configuration; smaller widths are useful for fast experiments and tests.
struct ModelConfig {
  int d = 64;           // shared encoder output width
  int latent_dim = 64;  // CVAE latent width
  int depth = 2;        // number of masked attention layers
  int prototype_count = 30;  // C
  int observed_len = 6;      // L_o
  int predicted_len = 12;    // L_p
  float epsilon = 1.3f;      // prior variance per latent component
  std::vector<int> mlp_hidden = {1024, 512, 1024};
  std::vector<int> attn_hidden = {1024, 1024};  // classifier Q/K stacks
  int attn_qk_dim = 1024;                       // masked attention Q/K output width

  int total_len() const { return observed_len + predicted_len; }

  void validate() const;  // throws std::invalid_argument
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Affine map taking the working region to [-1, 1]^2. Constants are rounded to
// float32 so a checkpoint round trip reproduces them bit-exactly.
struct CoordNormalizer {
  float lon_center = 0.0f, lat_center = 0.0f;
  float lon_half = 1.0f, lat_half = 1.0f;

  static CoordNormalizer from_bbox(const BoundingBox& box);
  static CoordNormalizer from_scenarios(const std::vector<Scenario>& scenarios);

  float nx(double lon) const { return static_cast<float>((lon - lon_center) / lon_half); }
  float ny(double lat) const { return static_cast<float>((lat - lat_center) / lat_half); }
  Point denorm(float x, float y) const {
    return {static_cast<double>(x) * lon_half + lon_center,
            static_cast<double>(y) * lat_half + lat_center};
  }
};

// All trainable blocks plus the frozen prototype artifacts.
struct Model {
  ModelConfig cfg;
  CoordNormalizer norm;

  Mlp history_encoder;      // L*2 -> d
  Mlp history_decoder;      // d+2 -> L*2
  Mlp observed_encoder;     // L_o*2 -> d
  Mlp prototype_encoder;    // L*2 -> d
  Mlp class_query;          // d -> d
  Mlp class_key;            // d -> d
  Mlp destination_encoder;  // 2 -> d
  Mlp destination_decoder;  // latent + 2d -> 2
  Mlp latent_encoder;       // 3d -> 2*latent
  struct AttentionLayer {
    Mlp query, key, value;  // 3d -> qk, 3d -> qk, 3d -> 3d
  };
  std::vector<AttentionLayer> attention;  // depth layers, separate parameters
  Mlp trajectory_decoder;                 // 3d -> L_p*2

  te::Tensor prototypes;     // [C, L*2] normalized, frozen after stage 1
  te::Tensor centroids;      // [C, d+2]
  // Per-dimension mean and standard deviation of the history latents; the
  // cluster metric works in this standardized space so learned feature scales
  // cannot drown out the start-point dimensions or vice versa.
  te::Tensor latent_scaler;  // [2, d+2]

  bool has_prototypes() const { return prototypes.defined(); }

  static Model create(const ModelConfig& cfg, const CoordNormalizer& norm, std::uint64_t seed);

  std::vector<te::Tensor> stage1_params() const;
  std::vector<te::Tensor> stage2_params() const;
  std::vector<std::pair<std::string, te::Tensor>> named_params() const;

  // `extra` is merged into the checkpoint config for provenance.
  Checkpoint to_checkpoint(const nlohmann::json& extra = {}) const;
  static Model from_checkpoint(const Checkpoint& ck);
};

}  // namespace dimtp
