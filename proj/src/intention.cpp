#include "dimtp/intention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dimtp/common.hpp"

namespace dimtp {

te::Tensor encode_observed(const Model& model, const Scenario& observed) {
  const int L_o = model.cfg.observed_len;
  const int m = static_cast<int>(observed.size());
  if (m == 0) throw std::invalid_argument("encode_observed: empty scenario");
  std::vector<float> flat(static_cast<std::size_t>(m) * L_o * 2);
  for (int i = 0; i < m; ++i) {
    const Trajectory& tr = observed.trajectories[i];
    if (static_cast<int>(tr.length()) != L_o) {
      throw std::invalid_argument("encode_observed: trajectory " + tr.mmsi + " has length " +
                                  std::to_string(tr.length()) + ", expected " +
                                  std::to_string(L_o));
    }
    for (int t = 0; t < L_o; ++t) {
      const std::size_t base = (static_cast<std::size_t>(i) * L_o + t) * 2;
      flat[base] = model.norm.nx(tr.points[t].lon);
      flat[base + 1] = model.norm.ny(tr.points[t].lat);
    }
  }
  return model.observed_encoder.forward(te::Tensor::constant({m, L_o * 2}, std::move(flat)));
}

te::Tensor encode_prototypes(const Model& model) {
  if (!model.has_prototypes()) {
    throw InvalidStateError("encode_prototypes: prototypes have not been fitted");
  }
  return model.prototype_encoder.forward(model.prototypes);
}

te::Tensor classify(const Model& model, const te::Tensor& z_obs, const te::Tensor& z_proto) {
  if (z_obs.shape().back() != z_proto.shape().back()) {
    throw std::invalid_argument("classify: encoder widths differ, " + te::shape_str(z_obs.shape()) +
                                " vs " + te::shape_str(z_proto.shape()));
  }
  const te::Tensor q = model.class_query.forward(z_obs);
  const te::Tensor k = model.class_key.forward(z_proto);
  const float inv_sqrt_d = 1.0f / std::sqrt(static_cast<float>(q.shape().back()));
  return te::softmax(te::scale(te::matmul_t(q, k), inv_sqrt_d));
}

IntentionTree build_tree(const te::Tensor& z_obs, const te::Tensor& z_proto,
                         const te::Tensor& probs, int k) {
  const int m = z_obs.dim(0);
  const int C = z_proto.dim(0);
  if (k < 1 || k > C) {
    throw std::invalid_argument("build_tree: k = " + std::to_string(k) + " outside [1, " +
                                std::to_string(C) + "]");
  }
  if (probs.dim(0) != m || probs.dim(1) != C) {
    throw std::invalid_argument("build_tree: probability shape " + te::shape_str(probs.shape()) +
                                " does not match m x C");
  }

  IntentionTree tree;
  tree.vessels = m;
  tree.k = k;
  tree.branch_ids.resize(static_cast<std::size_t>(m) * k);
  tree.branch_probs.resize(static_cast<std::size_t>(m) * k);

  std::vector<int> order(C);
  std::vector<int> obs_rows(static_cast<std::size_t>(m) * k);
  std::vector<int> proto_rows(static_cast<std::size_t>(m) * k);
  std::span<const float> p = probs.values();
  for (int i = 0; i < m; ++i) {
    std::iota(order.begin(), order.end(), 0);
    const float* row = p.data() + static_cast<std::size_t>(i) * C;
    std::sort(order.begin(), order.end(), [row](int a, int b) {
      if (row[a] != row[b]) return row[a] > row[b];
      return a < b;
    });
    double total = 0.0;
    for (int j = 0; j < k; ++j) total += row[order[j]];
    for (int j = 0; j < k; ++j) {
      const std::size_t at = static_cast<std::size_t>(i) * k + j;
      tree.branch_ids[at] = order[j];
      tree.branch_probs[at] =
          total > 0.0 ? static_cast<float>(row[order[j]] / total) : 1.0f / static_cast<float>(k);
      obs_rows[at] = i;
      proto_rows[at] = order[j];
    }
  }

  tree.branches = te::concat({te::gather_rows(z_obs, obs_rows), te::gather_rows(z_proto, proto_rows)});
  return tree;
}

IntentionTree build_forced_tree(const te::Tensor& z_obs, const te::Tensor& z_proto,
                                const std::vector<int>& labels) {
  const int m = z_obs.dim(0);
  const int C = z_proto.dim(0);
  if (static_cast<int>(labels.size()) != m) {
    throw std::invalid_argument("build_forced_tree: need one label per vessel");
  }
  for (int y : labels) {
    if (y < 0 || y >= C) throw std::invalid_argument("build_forced_tree: label outside [0, C)");
  }
  IntentionTree tree;
  tree.vessels = m;
  tree.k = 1;
  tree.branch_ids = labels;
  tree.branch_probs.assign(static_cast<std::size_t>(m), 1.0f);
  std::vector<int> obs_rows(m);
  std::iota(obs_rows.begin(), obs_rows.end(), 0);
  tree.branches = te::concat({te::gather_rows(z_obs, obs_rows), te::gather_rows(z_proto, labels)});
  return tree;
}

}  // namespace dimtp
