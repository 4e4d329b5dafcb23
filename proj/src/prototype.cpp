#include "dimtp/prototype.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "dimtp/common.hpp"
#include "dimtp/nn.hpp"
#include "dimtp/rng.hpp"

namespace dimtp {

DecoupledHistory decouple(std::span<const Trajectory> trajectories, const CoordNormalizer& norm,
                          int expected_len) {
  const int m = static_cast<int>(trajectories.size());
  const int L = expected_len;
  std::vector<float> p0(static_cast<std::size_t>(m) * 2);
  std::vector<float> rel(static_cast<std::size_t>(m) * L * 2);
  std::vector<float> abs(static_cast<std::size_t>(m) * L * 2);

  for (int i = 0; i < m; ++i) {
    const Trajectory& tr = trajectories[i];
    if (static_cast<int>(tr.length()) != L) {
      throw std::invalid_argument("decouple: trajectory " + tr.mmsi + " has length " +
                                  std::to_string(tr.length()) + ", expected " + std::to_string(L));
    }
    // Normalize in double, subtract, then round once to float32.
    const double x0 = (tr.points[0].lon - norm.lon_center) / norm.lon_half;
    const double y0 = (tr.points[0].lat - norm.lat_center) / norm.lat_half;
    p0[2 * i] = static_cast<float>(x0);
    p0[2 * i + 1] = static_cast<float>(y0);
    for (int t = 0; t < L; ++t) {
      const double x = (tr.points[t].lon - norm.lon_center) / norm.lon_half;
      const double y = (tr.points[t].lat - norm.lat_center) / norm.lat_half;
      const std::size_t base = (static_cast<std::size_t>(i) * L + t) * 2;
      abs[base] = static_cast<float>(x);
      abs[base + 1] = static_cast<float>(y);
      rel[base] = static_cast<float>(x - x0);
      rel[base + 1] = static_cast<float>(y - y0);
    }
  }

  DecoupledHistory out;
  out.count = m;
  out.start_points = te::Tensor::constant({m, 2}, std::move(p0));
  out.rel_shapes = te::Tensor::constant({m, L * 2}, std::move(rel));
  out.targets = te::Tensor::constant({m, L * 2}, std::move(abs));
  return out;
}

namespace {

double sq_dist(const float* a, const float* b, int dim) {
  double acc = 0.0;
  for (int c = 0; c < dim; ++c) {
    const double d = static_cast<double>(a[c]) - static_cast<double>(b[c]);
    acc += d * d;
  }
  return acc;
}

int nearest_centroid(const float* p, const std::vector<float>& centroids, int k, int dim) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < k; ++c) {
    const double d = sq_dist(p, centroids.data() + static_cast<std::size_t>(c) * dim, dim);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

}  // namespace

KmeansResult kmeans(std::span<const float> points, int n, int dim, int k, std::uint64_t seed,
                    int max_iter) {
  if (n < k) throw std::invalid_argument("kmeans: fewer points than clusters");
  if (k < 1 || dim < 1) throw std::invalid_argument("kmeans: k and dim must be positive");
  Rng rng(seed);
  const float* pts = points.data();

  // k-means++ seeding.
  KmeansResult res;
  res.centroids.resize(static_cast<std::size_t>(k) * dim);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  int first = rng.uniform_int(0, n - 1);
  std::copy_n(pts + static_cast<std::size_t>(first) * dim, dim, res.centroids.begin());
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = sq_dist(pts + static_cast<std::size_t>(i) * dim,
                               res.centroids.data() + static_cast<std::size_t>(c - 1) * dim, dim);
      d2[i] = std::min(d2[i], d);
      total += d2[i];
    }
    int chosen = -1;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc >= r) {
          chosen = i;
          break;
        }
      }
    }
    if (chosen < 0) chosen = c % n;  // all remaining distances zero
    std::copy_n(pts + static_cast<std::size_t>(chosen) * dim, dim,
                res.centroids.begin() + static_cast<std::size_t>(c) * dim);
  }

  res.assignment.assign(n, -1);
  std::vector<double> sums(static_cast<std::size_t>(k) * dim);
  std::vector<int> counts(k);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) {
      const int c = nearest_centroid(pts + static_cast<std::size_t>(i) * dim, res.centroids, k, dim);
      inertia += sq_dist(pts + static_cast<std::size_t>(i) * dim,
                         res.centroids.data() + static_cast<std::size_t>(c) * dim, dim);
      if (c != res.assignment[i]) changed = true;
      res.assignment[i] = c;
    }
    res.inertia_history.push_back(inertia);
    res.iterations = iter + 1;
    if (!changed) break;

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      const int c = res.assignment[i];
      ++counts[c];
      for (int col = 0; col < dim; ++col) {
        sums[static_cast<std::size_t>(c) * dim + col] +=
            pts[static_cast<std::size_t>(i) * dim + col];
      }
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      for (int col = 0; col < dim; ++col) {
        res.centroids[static_cast<std::size_t>(c) * dim + col] =
            static_cast<float>(sums[static_cast<std::size_t>(c) * dim + col] / counts[c]);
      }
    }
  }
  return res;
}

std::vector<float> encode_history(const Model& model, const DecoupledHistory& hist) {
  const te::Tensor enc = model.history_encoder.forward(hist.rel_shapes);
  const te::Tensor z = te::concat({enc, hist.start_points});
  return {z.values().begin(), z.values().end()};
}

AutoencoderReport train_autoencoder(Model& model, const DecoupledHistory& hist, int epochs,
                                    float base_lr, std::span<const int> milestones) {
  if (hist.count < 1) throw std::invalid_argument("train_autoencoder: empty history");
  AutoencoderReport report;
  Adam opt(model.stage1_params(), base_lr);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    opt.set_lr(lr_at_epoch(base_lr, milestones, epoch));
    opt.zero_grad();
    te::Tape tape;
    const te::Tensor enc = model.history_encoder.forward(hist.rel_shapes);
    const te::Tensor z = te::concat({enc, hist.start_points});
    const te::Tensor recon = model.history_decoder.forward(z);
    const te::Tensor loss = te::mean(te::square(te::sub(recon, hist.targets)));
    tape.backward(loss);
    opt.step();
    const float lv = loss.scalar();
    if (!std::isfinite(lv)) {
      throw std::runtime_error("train_autoencoder: non-finite loss at epoch " +
                               std::to_string(epoch));
    }
    report.loss_per_epoch.push_back(lv);
  }
  return report;
}

namespace {

// Column-wise mean and std over a row-major [n, dim] array; std floored so
// constant columns stay harmless.
std::vector<float> column_scaler(const std::vector<float>& pts, int n, int dim) {
  std::vector<float> scaler(static_cast<std::size_t>(2) * dim);
  for (int c = 0; c < dim; ++c) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += pts[static_cast<std::size_t>(i) * dim + c];
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = pts[static_cast<std::size_t>(i) * dim + c] - mean;
      var += d * d;
    }
    scaler[c] = static_cast<float>(mean);
    scaler[dim + c] = static_cast<float>(std::max(std::sqrt(var / n), 1e-6));
  }
  return scaler;
}

std::vector<float> standardize(const std::vector<float>& pts, const std::vector<float>& scaler,
                               int dim) {
  std::vector<float> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const int c = static_cast<int>(i % dim);
    out[i] = (pts[i] - scaler[c]) / scaler[dim + c];
  }
  return out;
}

}  // namespace

void extract_prototypes(Model& model, const DecoupledHistory& hist, std::uint64_t seed) {
  const int C = model.cfg.prototype_count;
  if (hist.count < C) {
    throw std::invalid_argument("extract_prototypes: " + std::to_string(hist.count) +
                                " trajectories for " + std::to_string(C) + " clusters");
  }
  const std::vector<float> latents = encode_history(model, hist);
  const int dim = model.cfg.d + 2;

  // Cluster in the standardized space, then map the centroids back; the
  // per-dimension affine commutes with cluster means, so these are exactly
  // the original-space centroids of the same partition.
  const std::vector<float> scaler = column_scaler(latents, hist.count, dim);
  const KmeansResult km = kmeans(standardize(latents, scaler, dim), hist.count, dim, C, seed);
  std::vector<float> centroids(km.centroids.size());
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    const int c = static_cast<int>(i % dim);
    centroids[i] = scaler[c] + scaler[dim + c] * km.centroids[i];
  }

  model.latent_scaler = te::Tensor::constant({2, dim}, std::vector<float>(scaler));
  model.centroids = te::Tensor::constant({C, dim}, std::move(centroids));
  const te::Tensor decoded = model.history_decoder.forward(model.centroids);
  model.prototypes = te::Tensor::constant(
      {C, model.cfg.total_len() * 2},
      std::vector<float>(decoded.values().begin(), decoded.values().end()));
}

std::vector<int> assign_labels(const Model& model, std::span<const Trajectory> trajectories) {
  if (!model.has_prototypes()) {
    throw InvalidStateError("assign_labels: prototypes have not been fitted");
  }
  const DecoupledHistory hist = decouple(trajectories, model.norm, model.cfg.total_len());
  const int dim = model.cfg.d + 2;
  const int C = model.cfg.prototype_count;
  const std::vector<float> scaler(model.latent_scaler.values().begin(),
                                  model.latent_scaler.values().end());
  const std::vector<float> latents = standardize(encode_history(model, hist), scaler, dim);
  const std::vector<float> cents = standardize(
      std::vector<float>(model.centroids.values().begin(), model.centroids.values().end()),
      scaler, dim);
  std::vector<int> labels(hist.count);
  for (int i = 0; i < hist.count; ++i) {
    labels[i] = nearest_centroid(latents.data() + static_cast<std::size_t>(i) * dim, cents, C, dim);
  }
  return labels;
}

std::vector<std::vector<Point>> decode_prototypes_deg(const Model& model) {
  if (!model.has_prototypes()) {
    throw InvalidStateError("decode_prototypes_deg: prototypes have not been fitted");
  }
  const int C = model.cfg.prototype_count;
  const int L = model.cfg.total_len();
  std::vector<std::vector<Point>> out(C);
  std::span<const float> v = model.prototypes.values();
  for (int c = 0; c < C; ++c) {
    out[c].reserve(L);
    for (int t = 0; t < L; ++t) {
      const std::size_t base = (static_cast<std::size_t>(c) * L + t) * 2;
      out[c].push_back(model.norm.denorm(v[base], v[base + 1]));
    }
  }
  return out;
}

}  // namespace dimtp
