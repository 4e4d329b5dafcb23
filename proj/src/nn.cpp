#include "dimtp/nn.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace dimtp {

Mlp Mlp::create(std::string name, std::vector<int> widths, Rng& rng) {
  if (widths.size() < 2) throw std::invalid_argument("Mlp: need at least two widths");
  Mlp mlp;
  mlp.name = std::move(name);
  mlp.widths = std::move(widths);
  for (std::size_t l = 0; l + 1 < mlp.widths.size(); ++l) {
    const int fan_in = mlp.widths[l];
    const int fan_out = mlp.widths[l + 1];
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<float> w(static_cast<std::size_t>(fan_in) * fan_out);
    for (float& x : w) x = static_cast<float>(rng.uniform(-bound, bound));
    mlp.weights.push_back(te::Tensor::param({fan_in, fan_out}, std::move(w)));
    mlp.biases.push_back(te::Tensor::param({fan_out}, std::vector<float>(fan_out, 0.0f)));
  }
  return mlp;
}

te::Tensor Mlp::forward(const te::Tensor& x) const {
  te::Tensor h = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    h = te::add(te::matmul(h, weights[l]), biases[l]);
    if (l + 1 < weights.size()) h = te::relu(h);
  }
  return h;
}

void Mlp::collect(std::vector<te::Tensor>& params) const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    params.push_back(weights[l]);
    params.push_back(biases[l]);
  }
}

void Mlp::collect_named(std::vector<std::pair<std::string, te::Tensor>>& out) const {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.emplace_back(name + ".layer" + std::to_string(l) + ".weight", weights[l]);
    out.emplace_back(name + ".layer" + std::to_string(l) + ".bias", biases[l]);
  }
}

void Mlp::bind(const std::vector<std::pair<std::string, te::Tensor>>& named) {
  std::map<std::string, te::Tensor> lookup(named.begin(), named.end());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (const char* kind : {"weight", "bias"}) {
      const std::string key = name + ".layer" + std::to_string(l) + "." + kind;
      auto it = lookup.find(key);
      if (it == lookup.end()) throw std::invalid_argument("checkpoint is missing tensor " + key);
      te::Tensor& dst = std::string(kind) == "weight" ? weights[l] : biases[l];
      if (it->second.shape() != dst.shape()) {
        throw std::invalid_argument("checkpoint tensor " + key + " has shape " +
                                    te::shape_str(it->second.shape()) + ", expected " +
                                    te::shape_str(dst.shape()));
      }
      dst = it->second;
    }
  }
}

Adam::Adam(std::vector<te::Tensor> params, float lr, float beta1, float beta2, float eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const te::Tensor& p : params_) {
    m_.emplace_back(p.size(), 0.0f);
    v_.emplace_back(p.size(), 0.0f);
  }
}

void Adam::zero_grad() {
  for (te::Tensor& p : params_) p.zero_grad();
}

void Adam::step() {
  ++t_;
  const float bc1 = 1.0f - std::pow(beta1_, static_cast<float>(t_));
  const float bc2 = 1.0f - std::pow(beta2_, static_cast<float>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    std::span<float> w = params_[i].values_mut();
    std::span<const float> g = params_[i].grad();
    float* m = m_[i].data();
    float* v = v_[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0f - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0f - beta2_) * g[j] * g[j];
      const float mhat = m[j] / bc1;
      const float vhat = v[j] / bc2;
      w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

float lr_at_epoch(float base_lr, std::span<const int> milestones, int epoch) {
  float lr = base_lr;
  for (int m : milestones) {
    if (epoch >= m) lr *= 0.5f;
  }
  return lr;
}

}  // namespace dimtp
