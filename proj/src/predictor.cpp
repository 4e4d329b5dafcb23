#include "dimtp/predictor.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dimtp {

namespace {
constexpr float kMaskedLogit = -1e30f;  // absorbs any finite score, exp underflows to exact 0
constexpr std::uint64_t kPriorStream = 0x70726f72ULL;
}  // namespace

LatentDistribution encode_latent(const Model& model, const te::Tensor& dest_norm,
                                 const IntentionTree& tree) {
  const int m = tree.vessels;
  const int k = tree.k;
  if (dest_norm.shape().size() != 2 || dest_norm.dim(0) != m || dest_norm.dim(1) != 2) {
    throw std::invalid_argument("encode_latent: destination shape " +
                                te::shape_str(dest_norm.shape()) + " does not match m x 2");
  }
  const te::Tensor dest_enc = model.destination_encoder.forward(dest_norm);  // [m, d]
  std::vector<int> rep(static_cast<std::size_t>(m) * k);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < k; ++j) rep[static_cast<std::size_t>(i) * k + j] = i;
  }
  const te::Tensor joint =
      model.latent_encoder.forward(te::concat({te::gather_rows(dest_enc, rep), tree.branches}));
  const int ld = model.cfg.latent_dim;
  return {te::slice_last(joint, 0, ld), te::slice_last(joint, ld, ld)};
}

te::Tensor sample_prior(const Model& model, int vessels, int k, int per_branch,
                        std::uint64_t seed) {
  if (per_branch < 1) throw std::invalid_argument("sample_prior: per-branch count must be >= 1");
  const int ld = model.cfg.latent_dim;
  const float sd = std::sqrt(model.cfg.epsilon);
  std::vector<float> z(static_cast<std::size_t>(vessels) * k * per_branch * ld);
  for (int i = 0; i < vessels; ++i) {
    for (int b = 0; b < k; ++b) {
      Rng stream(mix_seed(mix_seed(mix_seed(seed, kPriorStream), static_cast<std::uint64_t>(i)),
                          static_cast<std::uint64_t>(b)));
      float* row = z.data() + ((static_cast<std::size_t>(i) * k + b) * per_branch) * ld;
      for (int s = 0; s < per_branch * ld; ++s) row[s] = sd * stream.normal_f();
    }
  }
  return te::Tensor::constant({vessels * k * per_branch, ld}, std::move(z));
}

te::Tensor sample_posterior(const LatentDistribution& dist, Rng& rng) {
  std::vector<float> eta(static_cast<std::size_t>(dist.mu.size()));
  for (float& e : eta) e = rng.normal_f();
  const te::Tensor noise = te::Tensor::constant(dist.mu.shape(), std::move(eta));
  return te::add(dist.mu, te::mul(te::exp(te::scale(dist.log_var, 0.5f)), noise));
}

std::vector<int> repeat_branch_rows(int vessels, int k, int per_branch) {
  std::vector<int> rows(static_cast<std::size_t>(vessels) * k * per_branch);
  std::size_t at = 0;
  for (int i = 0; i < vessels; ++i) {
    for (int b = 0; b < k; ++b) {
      for (int s = 0; s < per_branch; ++s) rows[at++] = i * k + b;
    }
  }
  return rows;
}

te::Tensor decode_destination(const Model& model, const te::Tensor& z, const IntentionTree& tree,
                              const std::vector<int>& branch_rows) {
  return model.destination_decoder.forward(
      te::concat({z, te::gather_rows(tree.branches, branch_rows)}));
}

te::Tensor fuse_features(const Model& model, const IntentionTree& tree,
                         const std::vector<int>& branch_rows, const te::Tensor& dest_hat) {
  return te::concat({te::gather_rows(tree.branches, branch_rows),
                     model.destination_encoder.forward(dest_hat)});
}

te::Tensor attention_stack(const Model& model, const te::Tensor& fused, const EncounterMask& mask,
                           int vessels, int k, int per_branch) {
  if (static_cast<int>(mask.size()) != vessels) {
    throw std::invalid_argument("attention_stack: mask extent " + std::to_string(mask.size()) +
                                " does not match " + std::to_string(vessels) + " vessels");
  }
  const int slices = k * per_branch;
  const int width = fused.shape().back();
  if (fused.dim(0) != vessels * slices) {
    throw std::invalid_argument("attention_stack: row count does not match m*k*(n/k)");
  }

  // Additive bias: 0 where attention is permitted (self or flagged pair).
  std::vector<float> bias(static_cast<std::size_t>(vessels) * vessels, 0.0f);
  for (int i = 0; i < vessels; ++i) {
    for (int j = 0; j < vessels; ++j) {
      if (i != j && mask.at(i, j) == 0) bias[static_cast<std::size_t>(i) * vessels + j] = kMaskedLogit;
    }
  }
  const te::Tensor mask_bias = te::Tensor::constant({vessels, vessels}, std::move(bias));

  // Row (i*slices + slice) belongs to vessel i; slice index enumerates
  // (branch, sample). The reassembly permutation maps slice-major rows back.
  std::vector<std::vector<int>> slice_rows(slices, std::vector<int>(vessels));
  std::vector<int> unperm(static_cast<std::size_t>(vessels) * slices);
  for (int s = 0; s < slices; ++s) {
    for (int i = 0; i < vessels; ++i) {
      slice_rows[s][i] = i * slices + s;
      unperm[static_cast<std::size_t>(i) * slices + s] = s * vessels + i;
    }
  }

  const float inv_sqrt_w = 1.0f / std::sqrt(static_cast<float>(model.cfg.attn_qk_dim));
  te::Tensor zp = fused;
  for (const Model::AttentionLayer& layer : model.attention) {
    const te::Tensor q = layer.query.forward(zp);
    const te::Tensor key = layer.key.forward(zp);
    const te::Tensor v = layer.value.forward(zp);

    std::vector<te::Tensor> outs;
    outs.reserve(slices);
    for (int s = 0; s < slices; ++s) {
      const te::Tensor qs = te::gather_rows(q, slice_rows[s]);
      const te::Tensor ks = te::gather_rows(key, slice_rows[s]);
      const te::Tensor vs = te::gather_rows(v, slice_rows[s]);
      const te::Tensor logits = te::add(te::scale(te::matmul_t(qs, ks), inv_sqrt_w), mask_bias);
      const te::Tensor slice_out = te::matmul(te::softmax(logits), vs);  // [m, width]
      outs.push_back(te::reshape(slice_out, {1, vessels * width}));
    }
    const te::Tensor stacked = te::reshape(te::concat(outs), {slices * vessels, width});
    zp = te::add(zp, te::gather_rows(stacked, unperm));
  }
  return zp;
}

te::Tensor decode_paths(const Model& model, const te::Tensor& fused) {
  return model.trajectory_decoder.forward(fused);
}

ScenarioPrediction predict_scenario(const Model& model, const Scenario& observed,
                                    const EncounterMask& mask, int k, int n, std::uint64_t seed) {
  const int m = static_cast<int>(observed.size());
  if (k < 1 || k > model.cfg.prototype_count) {
    throw std::invalid_argument("predict: k outside [1, C]");
  }
  if (n < k || n % k != 0) {
    throw std::invalid_argument("predict: n must be a positive multiple of k");
  }
  const int per = n / k;
  const int L_p = model.cfg.predicted_len;

  const te::Tensor z_obs = encode_observed(model, observed);
  const te::Tensor z_proto = encode_prototypes(model);
  const te::Tensor probs = classify(model, z_obs, z_proto);
  const IntentionTree tree = build_tree(z_obs, z_proto, probs, k);

  const te::Tensor z = sample_prior(model, m, k, per, seed);
  const std::vector<int> rows = repeat_branch_rows(m, k, per);
  const te::Tensor dest_hat = decode_destination(model, z, tree, rows);
  const te::Tensor fused = fuse_features(model, tree, rows, dest_hat);
  const te::Tensor refined = attention_stack(model, fused, mask, m, k, per);
  const te::Tensor paths = decode_paths(model, refined);  // [m*k*per, L_p*2]

  ScenarioPrediction out;
  out.k = k;
  out.n = n;
  std::span<const float> pv = paths.values();
  for (int i = 0; i < m; ++i) {
    VesselPrediction vp;
    vp.mmsi = observed.trajectories[i].mmsi;
    for (int b = 0; b < k; ++b) {
      vp.branch_ids.push_back(tree.branch_ids[static_cast<std::size_t>(i) * k + b]);
      vp.branch_probs.push_back(tree.branch_probs[static_cast<std::size_t>(i) * k + b]);
    }
    for (int b = 0; b < k; ++b) {
      for (int s = 0; s < per; ++s) {
        Candidate cand;
        cand.branch_id = vp.branch_ids[b];
        cand.branch_prob = vp.branch_probs[b];
        const std::size_t row = (static_cast<std::size_t>(i) * k + b) * per + s;
        cand.points.reserve(L_p);
        for (int t = 0; t < L_p; ++t) {
          const std::size_t base = row * L_p * 2 + static_cast<std::size_t>(t) * 2;
          cand.points.push_back(model.norm.denorm(pv[base], pv[base + 1]));
        }
        vp.candidates.push_back(std::move(cand));
      }
    }
    out.vessels.push_back(std::move(vp));
  }
  return out;
}

}  // namespace dimtp
