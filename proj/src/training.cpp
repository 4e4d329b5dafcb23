#include "dimtp/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "dimtp/common.hpp"
#include "dimtp/nn.hpp"
#include "dimtp/prototype.hpp"
#include "dimtp/rng.hpp"

namespace dimtp {

namespace {
constexpr std::uint64_t kPosteriorStream = 0x706f7374ULL;

te::Tensor dest_gt_tensor(const Model& model, const Scenario& scenario) {
  const int m = static_cast<int>(scenario.size());
  std::vector<float> d(static_cast<std::size_t>(m) * 2);
  for (int i = 0; i < m; ++i) {
    const Point& last = scenario.trajectories[i].points.back();
    d[2 * i] = model.norm.nx(last.lon);
    d[2 * i + 1] = model.norm.ny(last.lat);
  }
  return te::Tensor::constant({m, 2}, std::move(d));
}

te::Tensor future_gt_tensor(const Model& model, const Scenario& scenario) {
  const int m = static_cast<int>(scenario.size());
  const int L_o = model.cfg.observed_len;
  const int L_p = model.cfg.predicted_len;
  std::vector<float> g(static_cast<std::size_t>(m) * L_p * 2);
  for (int i = 0; i < m; ++i) {
    for (int t = 0; t < L_p; ++t) {
      const Point& p = scenario.trajectories[i].points[L_o + t];
      const std::size_t base = (static_cast<std::size_t>(i) * L_p + t) * 2;
      g[base] = model.norm.nx(p.lon);
      g[base + 1] = model.norm.ny(p.lat);
    }
  }
  return te::Tensor::constant({m, L_p * 2}, std::move(g));
}

}  // namespace

te::Tensor loss_classification(const te::Tensor& probs, const std::vector<int>& labels) {
  const int m = probs.dim(0);
  const int C = probs.dim(1);
  if (static_cast<int>(labels.size()) != m) {
    throw std::invalid_argument("loss_classification: need one label per row");
  }
  std::vector<float> mask(static_cast<std::size_t>(m) * C, 0.0f);
  for (int i = 0; i < m; ++i) {
    if (labels[i] < 0 || labels[i] >= C) {
      throw std::invalid_argument("loss_classification: label outside [0, C)");
    }
    mask[static_cast<std::size_t>(i) * C + labels[i]] = 1.0f;
  }
  const te::Tensor onehot = te::Tensor::constant({m, C}, std::move(mask));
  const te::Tensor picked = te::mul(onehot, te::log(te::clamp_min(probs, 1e-12f)));
  return te::scale(te::sum(picked), -1.0f / static_cast<float>(m));
}

te::Tensor loss_cvae(const LatentDistribution& dist, const te::Tensor& dest_hat,
                     const te::Tensor& dest_gt, float alpha, float epsilon) {
  const int rows = dist.mu.dim(0);
  // Per element: (exp(lv) + mu^2) / eps - lv - (1 - log eps), halved.
  const te::Tensor var_term = te::scale(te::add(te::exp(dist.log_var), te::square(dist.mu)),
                                        1.0f / epsilon);
  const te::Tensor elems =
      te::scale(te::sub(var_term, te::add_scalar(dist.log_var, 1.0f - std::log(epsilon))), 0.5f);
  const te::Tensor kl = te::scale(te::sum(elems), 1.0f / static_cast<float>(rows));
  const te::Tensor dest_err = te::mean(te::square(te::sub(dest_hat, dest_gt)));
  return te::add(kl, te::scale(dest_err, alpha));
}

te::Tensor loss_regression(const te::Tensor& pred, const te::Tensor& gt) {
  if (pred.shape() != gt.shape()) {
    throw std::invalid_argument("loss_regression: shape mismatch, " + te::shape_str(pred.shape()) +
                                " vs " + te::shape_str(gt.shape()));
  }
  const int per_vessel = pred.shape().back();
  return te::scale(te::sum(te::square(te::sub(pred, gt))), 1.0f / static_cast<float>(per_vessel));
}

Stage1Result train_stage1(Model& model, const std::vector<Scenario>& history,
                          const TrainOptions& opts) {
  std::vector<Trajectory> flat;
  for (const Scenario& sc : history) {
    flat.insert(flat.end(), sc.trajectories.begin(), sc.trajectories.end());
  }
  if (flat.empty()) throw std::invalid_argument("train_stage1: empty history set");

  const DecoupledHistory hist = decouple(flat, model.norm, model.cfg.total_len());
  const AutoencoderReport rep =
      train_autoencoder(model, hist, opts.epochs, opts.lr, opts.milestones);
  extract_prototypes(model, hist, mix_seed(opts.seed, 0x6b6dULL));

  Stage1Result out;
  out.loss_per_epoch = rep.loss_per_epoch;
  out.labels = assign_labels(model, flat);
  return out;
}

std::vector<std::vector<int>> label_scenarios(const Model& model,
                                              const std::vector<Scenario>& scenarios) {
  std::vector<std::vector<int>> out;
  out.reserve(scenarios.size());
  for (const Scenario& sc : scenarios) out.push_back(assign_labels(model, sc.trajectories));
  return out;
}

Stage2Result train_stage2(Model& model, const std::vector<Scenario>& scenarios,
                          const std::vector<EncounterMask>& masks,
                          const std::vector<std::vector<int>>& labels, const TrainOptions& opts) {
  if (!model.has_prototypes()) {
    throw InvalidStateError("train_stage2: stage-1 prototypes are missing");
  }
  if (scenarios.size() != masks.size() || scenarios.size() != labels.size()) {
    throw std::invalid_argument("train_stage2: scenarios, masks and labels must align");
  }
  if (scenarios.empty()) throw std::invalid_argument("train_stage2: no scenarios");

  Adam opt(model.stage2_params(), opts.lr);
  Stage2Result result;
  const LossWeights& w = opts.weights;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const float lr = lr_at_epoch(opts.lr, opts.milestones, epoch);
    opt.set_lr(lr);

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
      const Scenario& sc = scenarios[s];
      const Scenario observed = sc.head(model.cfg.observed_len);

      opt.zero_grad();
      te::Tape tape;

      const te::Tensor z_obs = encode_observed(model, observed);
      const te::Tensor z_proto = encode_prototypes(model);
      const te::Tensor probs = classify(model, z_obs, z_proto);
      const IntentionTree tree = build_forced_tree(z_obs, z_proto, labels[s]);

      const te::Tensor dest_gt = dest_gt_tensor(model, sc);
      const LatentDistribution dist = encode_latent(model, dest_gt, tree);
      Rng eta(mix_seed(mix_seed(mix_seed(opts.seed, kPosteriorStream),
                                static_cast<std::uint64_t>(epoch)),
                       static_cast<std::uint64_t>(s)));
      const te::Tensor z = sample_posterior(dist, eta);

      const std::vector<int> rows = repeat_branch_rows(tree.vessels, 1, 1);
      const te::Tensor dest_hat = decode_destination(model, z, tree, rows);
      const te::Tensor fused = fuse_features(model, tree, rows, dest_hat);
      const te::Tensor refined = attention_stack(model, fused, masks[s], tree.vessels, 1, 1);
      const te::Tensor pred = decode_paths(model, refined);

      const te::Tensor l_clf = loss_classification(probs, labels[s]);
      const te::Tensor l_cvae = loss_cvae(dist, dest_hat, dest_gt, w.alpha, model.cfg.epsilon);
      const te::Tensor l_reg = loss_regression(pred, future_gt_tensor(model, sc));
      const te::Tensor total = te::add(
          te::add(te::scale(l_clf, w.lambda_clf), te::scale(l_cvae, w.lambda_cvae)),
          te::scale(l_reg, w.lambda_reg));

      if (!std::isfinite(total.scalar())) {
        throw std::runtime_error("train_stage2: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", scenario " + std::to_string(s));
      }
      tape.backward(total);
      opt.step();

      stats.clf += l_clf.scalar();
      stats.cvae += l_cvae.scalar();
      stats.reg += l_reg.scalar();
      stats.total += total.scalar();
    }
    const float inv = 1.0f / static_cast<float>(scenarios.size());
    stats.clf *= inv;
    stats.cvae *= inv;
    stats.reg *= inv;
    stats.total *= inv;
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.epochs.push_back(stats);
  }
  return result;
}

std::string Stage2Result::to_csv() const {
  std::string out = "epoch,lr,loss_clf,loss_cvae,loss_reg,loss_total,seconds\n";
  char buf[192];
  for (const EpochStats& e : epochs) {
    std::snprintf(buf, sizeof(buf), "%d,%.8g,%.8g,%.8g,%.8g,%.8g,%.3f\n", e.epoch, e.lr, e.clf,
                  e.cvae, e.reg, e.total, e.seconds);
    out += buf;
  }
  return out;
}

}  // namespace dimtp
