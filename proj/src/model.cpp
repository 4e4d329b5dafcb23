#include "dimtp/model.hpp"

#include <algorithm>
#include <stdexcept>

#include "dimtp/rng.hpp"

namespace dimtp {

using nlohmann::json;

void ModelConfig::validate() const {
  if (d <= 0 || latent_dim <= 0 || depth <= 0) {
    throw std::invalid_argument("model config: widths and depth must be positive");
  }
  if (prototype_count < 1) throw std::invalid_argument("model config: prototype_count >= 1");
  if (observed_len < 2 || predicted_len < 1) {
    throw std::invalid_argument("model config: observed_len >= 2 and predicted_len >= 1");
  }
  if (!(epsilon > 0.0f)) throw std::invalid_argument("model config: epsilon must be positive");
  if (mlp_hidden.empty() || attn_hidden.empty() || attn_qk_dim <= 0) {
    throw std::invalid_argument("model config: hidden stacks must be non-empty");
  }
}

json ModelConfig::to_json() const {
  return json{{"d", d},
              {"latent_dim", latent_dim},
              {"depth", depth},
              {"prototype_count", prototype_count},
              {"observed_len", observed_len},
              {"predicted_len", predicted_len},
              {"epsilon", epsilon},
              {"mlp_hidden", mlp_hidden},
              {"attn_hidden", attn_hidden},
              {"attn_qk_dim", attn_qk_dim}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  c.d = j.value("d", c.d);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.depth = j.value("depth", c.depth);
  c.prototype_count = j.value("prototype_count", c.prototype_count);
  c.observed_len = j.value("observed_len", c.observed_len);
  c.predicted_len = j.value("predicted_len", c.predicted_len);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
  c.attn_hidden = j.value("attn_hidden", c.attn_hidden);
  c.attn_qk_dim = j.value("attn_qk_dim", c.attn_qk_dim);
  c.validate();
  return c;
}

CoordNormalizer CoordNormalizer::from_bbox(const BoundingBox& box) {
  CoordNormalizer n;
  n.lon_center = static_cast<float>((box.lon_min + box.lon_max) / 2.0);
  n.lat_center = static_cast<float>((box.lat_min + box.lat_max) / 2.0);
  n.lon_half = std::max(static_cast<float>((box.lon_max - box.lon_min) / 2.0), 1e-6f);
  n.lat_half = std::max(static_cast<float>((box.lat_max - box.lat_min) / 2.0), 1e-6f);
  return n;
}

CoordNormalizer CoordNormalizer::from_scenarios(const std::vector<Scenario>& scenarios) {
  BoundingBox box{1e9, 1e9, -1e9, -1e9};
  bool any = false;
  for (const Scenario& sc : scenarios) {
    for (const Trajectory& tr : sc.trajectories) {
      for (const Point& p : tr.points) {
        any = true;
        box.lon_min = std::min(box.lon_min, p.lon);
        box.lat_min = std::min(box.lat_min, p.lat);
        box.lon_max = std::max(box.lon_max, p.lon);
        box.lat_max = std::max(box.lat_max, p.lat);
      }
    }
  }
  if (!any) throw std::invalid_argument("normalizer: no coordinates to fit");
  return from_bbox(box);
}

namespace {

Mlp make_block(const std::string& name, int in, const std::vector<int>& hidden, int out,
               std::uint64_t seed, std::uint64_t block_id) {
  std::vector<int> widths;
  widths.push_back(in);
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(out);
  Rng rng(mix_seed(seed, block_id));
  return Mlp::create(name, widths, rng);
}

}  // namespace

Model Model::create(const ModelConfig& cfg, const CoordNormalizer& norm, std::uint64_t seed) {
  cfg.validate();
  Model m;
  m.cfg = cfg;
  m.norm = norm;
  const int L2 = cfg.total_len() * 2;
  const int d = cfg.d;
  const int ld = cfg.latent_dim;

  m.history_encoder = make_block("history_encoder", L2, cfg.mlp_hidden, d, seed, 0);
  m.history_decoder = make_block("history_decoder", d + 2, cfg.mlp_hidden, L2, seed, 1);
  m.observed_encoder =
      make_block("observed_encoder", cfg.observed_len * 2, cfg.mlp_hidden, d, seed, 2);
  m.prototype_encoder = make_block("prototype_encoder", L2, cfg.mlp_hidden, d, seed, 3);
  m.class_query = make_block("class_query", d, cfg.attn_hidden, d, seed, 4);
  m.class_key = make_block("class_key", d, cfg.attn_hidden, d, seed, 5);
  m.destination_encoder = make_block("destination_encoder", 2, cfg.mlp_hidden, d, seed, 6);
  m.destination_decoder =
      make_block("destination_decoder", ld + 2 * d, cfg.mlp_hidden, 2, seed, 7);
  m.latent_encoder = make_block("latent_encoder", 3 * d, cfg.mlp_hidden, 2 * ld, seed, 8);
  m.trajectory_decoder =
      make_block("trajectory_decoder", 3 * d, cfg.mlp_hidden, cfg.predicted_len * 2, seed, 9);
  for (int l = 0; l < cfg.depth; ++l) {
    const std::string base = "attention" + std::to_string(l);
    AttentionLayer layer;
    layer.query = make_block(base + ".query", 3 * d, cfg.mlp_hidden, cfg.attn_qk_dim, seed,
                             10 + 3 * static_cast<std::uint64_t>(l));
    layer.key = make_block(base + ".key", 3 * d, cfg.mlp_hidden, cfg.attn_qk_dim, seed,
                           11 + 3 * static_cast<std::uint64_t>(l));
    layer.value = make_block(base + ".value", 3 * d, cfg.mlp_hidden, 3 * d, seed,
                             12 + 3 * static_cast<std::uint64_t>(l));
    m.attention.push_back(std::move(layer));
  }
  return m;
}

std::vector<te::Tensor> Model::stage1_params() const {
  std::vector<te::Tensor> out;
  history_encoder.collect(out);
  history_decoder.collect(out);
  return out;
}

std::vector<te::Tensor> Model::stage2_params() const {
  std::vector<te::Tensor> out;
  observed_encoder.collect(out);
  prototype_encoder.collect(out);
  class_query.collect(out);
  class_key.collect(out);
  destination_encoder.collect(out);
  destination_decoder.collect(out);
  latent_encoder.collect(out);
  for (const AttentionLayer& l : attention) {
    l.query.collect(out);
    l.key.collect(out);
    l.value.collect(out);
  }
  trajectory_decoder.collect(out);
  return out;
}

std::vector<std::pair<std::string, te::Tensor>> Model::named_params() const {
  std::vector<std::pair<std::string, te::Tensor>> out;
  history_encoder.collect_named(out);
  history_decoder.collect_named(out);
  observed_encoder.collect_named(out);
  prototype_encoder.collect_named(out);
  class_query.collect_named(out);
  class_key.collect_named(out);
  destination_encoder.collect_named(out);
  destination_decoder.collect_named(out);
  latent_encoder.collect_named(out);
  for (const AttentionLayer& l : attention) {
    l.query.collect_named(out);
    l.key.collect_named(out);
    l.value.collect_named(out);
  }
  trajectory_decoder.collect_named(out);
  return out;
}

Checkpoint Model::to_checkpoint(const json& extra) const {
  Checkpoint ck;
  ck.config["model"] = cfg.to_json();
  if (!extra.is_null() && !extra.empty()) ck.config["run"] = extra;
  ck.config["stage"] = has_prototypes() ? 2 : 1;
  for (const auto& [name, t] : named_params()) ck.add(name, t);
  ck.add("coord_normalizer",
         te::Tensor::constant({4}, {norm.lon_center, norm.lat_center, norm.lon_half, norm.lat_half}));
  if (has_prototypes()) {
    ck.add("prototype_trajectories", prototypes);
    ck.add("prototype_centroids", centroids);
    ck.add("prototype_latent_scaler", latent_scaler);
  }
  return ck;
}

Model Model::from_checkpoint(const Checkpoint& ck) {
  const ModelConfig cfg = ModelConfig::from_json(ck.config.at("model"));
  const te::Tensor nt = ck.get("coord_normalizer");
  CoordNormalizer norm;
  norm.lon_center = nt.values()[0];
  norm.lat_center = nt.values()[1];
  norm.lon_half = nt.values()[2];
  norm.lat_half = nt.values()[3];

  Model m = create(cfg, norm, 0);
  m.history_encoder.bind(ck.tensors);
  m.history_decoder.bind(ck.tensors);
  m.observed_encoder.bind(ck.tensors);
  m.prototype_encoder.bind(ck.tensors);
  m.class_query.bind(ck.tensors);
  m.class_key.bind(ck.tensors);
  m.destination_encoder.bind(ck.tensors);
  m.destination_decoder.bind(ck.tensors);
  m.latent_encoder.bind(ck.tensors);
  for (AttentionLayer& l : m.attention) {
    l.query.bind(ck.tensors);
    l.key.bind(ck.tensors);
    l.value.bind(ck.tensors);
  }
  m.trajectory_decoder.bind(ck.tensors);

  if (ck.has("prototype_trajectories")) {
    const te::Tensor pt = ck.get("prototype_trajectories");
    const te::Tensor ct = ck.get("prototype_centroids");
    const te::Tensor sc = ck.get("prototype_latent_scaler");
    m.prototypes = te::Tensor::constant(pt.shape(),
                                        std::vector<float>(pt.values().begin(), pt.values().end()));
    m.centroids = te::Tensor::constant(ct.shape(),
                                       std::vector<float>(ct.values().begin(), ct.values().end()));
    m.latent_scaler = te::Tensor::constant(sc.shape(),
                                           std::vector<float>(sc.values().begin(), sc.values().end()));
  }
  return m;
}

}  // namespace dimtp
