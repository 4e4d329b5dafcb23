#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dimtp/rng.hpp"
#include "dimtp/tensor.hpp"

namespace dimtp {

// Fully connected stack with ReLU between hidden layers and a linear output,
// applied row-wise: input [rows, widths.front()] -> [rows, widths.back()].
struct Mlp {
  std::string name;
  std::vector<int> widths;
  std::vector<te::Tensor> weights;  // [in, out] per layer
  std::vector<te::Tensor> biases;   // [out] per layer

  // Uniform init in +-sqrt(6 / (fan_in + fan_out)); biases zero.
  static Mlp create(std::string name, std::vector<int> widths, Rng& rng);

  te::Tensor forward(const te::Tensor& x) const;

  void collect(std::vector<te::Tensor>& params) const;
  void collect_named(std::vector<std::pair<std::string, te::Tensor>>& out) const;

  // Rebind parameters from a named map (checkpoint loading). Throws when a
  // tensor is missing or shaped differently.
  void bind(const std::vector<std::pair<std::string, te::Tensor>>& named);
};

// Standard Adam with bias correction. The learning rate may be changed
// between steps (multi-step schedules).
class Adam {
 public:
  explicit Adam(std::vector<te::Tensor> params, float lr = 1e-4f, float beta1 = 0.9f,
                float beta2 = 0.999f, float eps = 1e-8f);

  void set_lr(float lr) { lr_ = lr; }
  float lr() const { return lr_; }
  void zero_grad();
  void step();

 private:
  std::vector<te::Tensor> params_;
  std::vector<std::vector<float>> m_, v_;
  float lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

// Base rate halved at each milestone epoch already reached.
float lr_at_epoch(float base_lr, std::span<const int> milestones, int epoch);

}  // namespace dimtp
