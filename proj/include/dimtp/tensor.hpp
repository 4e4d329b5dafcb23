#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dimtp::te {

using Shape = std::vector<int>;

std::int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {
struct Node {
  Shape shape;
  std::vector<float> value;
  std::vector<float> grad;  // allocated only when requires_grad
  bool requires_grad = false;

  void ensure_grad() { grad.assign(value.size(), 0.0f); }
};
}  // namespace detail

// Dense row-major float32 array. Value-semantic handle; copies share storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<float> values);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, float v);
  // Trainable leaf: participates in backward and receives gradient.
  static Tensor param(Shape shape, std::vector<float> values);

  bool defined() const { return static_cast<bool>(n_); }
  const Shape& shape() const { return n_->shape; }
  int dim(int i) const { return n_->shape[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(n_->value.size()); }
  bool requires_grad() const { return n_->requires_grad; }

  std::span<const float> values() const { return n_->value; }
  std::span<float> values_mut() { return n_->value; }
  std::span<const float> grad() const { return n_->grad; }
  std::span<float> grad_mut() { return n_->grad; }
  void zero_grad();

  float scalar() const;  // requires size() == 1

  // Internal node access for the operator implementations.
  const std::shared_ptr<detail::Node>& impl() const { return n_; }
  static Tensor wrap(std::shared_ptr<detail::Node> n);

 private:
  std::shared_ptr<detail::Node> n_;
};

// Records the operations of one forward trace; reverse traversal yields
// gradients. RAII: construction makes this the active tape of the current
// thread, destruction restores the previous one. Confine a tape and the
// tensors traced on it to a single thread.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Reverse sweep from a scalar loss. Throws std::invalid_argument when the
  // loss is not scalar. Leaves without requires_grad receive no gradient.
  void backward(const Tensor& loss);

  void record(std::function<void()> step) { steps_.push_back(std::move(step)); }
  static Tape* current();

 private:
  std::vector<std::function<void()>> steps_;
  Tape* prev_ = nullptr;
};

// ---- forward operators (record onto the active tape when tracing) ----

Tensor matmul(const Tensor& a, const Tensor& b);    // [r,k] x [k,c]
Tensor matmul_t(const Tensor& a, const Tensor& b);  // [r,k] x [c,k]^T -> [r,c]

Tensor add(const Tensor& a, const Tensor& b);  // numpy-style right-aligned broadcast
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, float s);
Tensor add_scalar(const Tensor& a, float s);

Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
Tensor clamp_min(const Tensor& a, float lo);

Tensor softmax(const Tensor& a);  // along the last axis, max-subtracted

Tensor concat(const std::vector<Tensor>& parts);  // along the last axis
Tensor slice_last(const Tensor& a, int start, int len);
Tensor gather_rows(const Tensor& a, const std::vector<int>& rows);  // 2-D

Tensor reshape(const Tensor& a, Shape shape);

Tensor sum(const Tensor& a);   // -> shape {1}
Tensor mean(const Tensor& a);  // -> shape {1}

bool all_finite(const Tensor& a);

}  // namespace dimtp::te
