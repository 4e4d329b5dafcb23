#include "dimtp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dimtp::te {

namespace {

thread_local Tape* g_tape = nullptr;

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

NodePtr fresh(Shape shape) {
  auto n = std::make_shared<Node>();
  const std::int64_t count = numel(shape);
  n->shape = std::move(shape);
  n->value.resize(static_cast<std::size_t>(count));
  return n;
}

// Marks the output as traced when a tape is active and any input needs a
// gradient; returns true when the caller must record a backward step.
bool trace(const NodePtr& out, std::initializer_list<const Tensor*> inputs) {
  if (g_tape == nullptr) return false;
  bool any = false;
  for (const Tensor* t : inputs) any = any || t->requires_grad();
  if (!any) return false;
  out->requires_grad = true;
  out->ensure_grad();
  return true;
}

void check_defined(std::initializer_list<const Tensor*> inputs, const char* op) {
  for (const Tensor* t : inputs) {
    if (!t->defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor");
  }
}

// ---- raw kernels; all accumulate into c ----

void mm_nn_acc(const float* a, const float* b, float* c, int rows, int inner, int cols) {
  for (int i = 0; i < rows; ++i) {
    const float* ai = a + static_cast<std::size_t>(i) * inner;
    float* ci = c + static_cast<std::size_t>(i) * cols;
    for (int k = 0; k < inner; ++k) {
      const float aik = ai[k];
      const float* bk = b + static_cast<std::size_t>(k) * cols;
      for (int j = 0; j < cols; ++j) ci[j] += aik * bk[j];
    }
  }
}

void mm_nt_acc(const float* a, const float* b, float* c, int rows, int inner, int b_rows) {
  for (int i = 0; i < rows; ++i) {
    const float* ai = a + static_cast<std::size_t>(i) * inner;
    float* ci = c + static_cast<std::size_t>(i) * b_rows;
    for (int j = 0; j < b_rows; ++j) {
      const float* bj = b + static_cast<std::size_t>(j) * inner;
      float acc = 0.0f;
      for (int k = 0; k < inner; ++k) acc += ai[k] * bj[k];
      ci[j] += acc;
    }
  }
}

// c[i,j] += sum_r a[r,i] * b[r,j]; a is [rows, ca], b is [rows, cb]
void mm_tn_acc(const float* a, const float* b, float* c, int rows, int ca, int cb) {
  for (int r = 0; r < rows; ++r) {
    const float* ar = a + static_cast<std::size_t>(r) * ca;
    const float* br = b + static_cast<std::size_t>(r) * cb;
    for (int i = 0; i < ca; ++i) {
      const float ari = ar[i];
      float* ci = c + static_cast<std::size_t>(i) * cb;
      for (int j = 0; j < cb; ++j) ci[j] += ari * br[j];
    }
  }
}

struct Broadcast {
  Shape out;
  std::vector<std::int64_t> stride_a, stride_b;  // per out dim; 0 where broadcast
};

Broadcast broadcast_shapes(const Shape& a, const Shape& b, const char* op) {
  const int nd = static_cast<int>(std::max(a.size(), b.size()));
  Broadcast bc;
  bc.out.resize(nd);
  bc.stride_a.assign(nd, 0);
  bc.stride_b.assign(nd, 0);

  std::vector<std::int64_t> full_a(nd, 1), full_b(nd, 1);
  for (std::size_t i = 0; i < a.size(); ++i) full_a[nd - a.size() + i] = a[i];
  for (std::size_t i = 0; i < b.size(); ++i) full_b[nd - b.size() + i] = b[i];

  for (int d = 0; d < nd; ++d) {
    if (full_a[d] != full_b[d] && full_a[d] != 1 && full_b[d] != 1) {
      throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a) +
                                  " and " + shape_str(b));
    }
    bc.out[d] = static_cast<int>(std::max(full_a[d], full_b[d]));
  }
  std::int64_t sa = 1, sb = 1;
  for (int d = nd - 1; d >= 0; --d) {
    bc.stride_a[d] = full_a[d] == 1 ? 0 : sa;
    bc.stride_b[d] = full_b[d] == 1 ? 0 : sb;
    sa *= full_a[d];
    sb *= full_b[d];
  }
  return bc;
}

// Walks the broadcast output space once, calling fn(out_index, a_index, b_index).
template <class Fn>
void for_broadcast(const Broadcast& bc, Fn&& fn) {
  const std::int64_t n = numel(bc.out);
  const int nd = static_cast<int>(bc.out.size());
  std::vector<int> idx(nd, 0);
  std::int64_t ia = 0, ib = 0;
  for (std::int64_t o = 0; o < n; ++o) {
    fn(o, ia, ib);
    for (int d = nd - 1; d >= 0; --d) {
      ++idx[d];
      ia += bc.stride_a[d];
      ib += bc.stride_b[d];
      if (idx[d] < bc.out[d]) break;
      idx[d] = 0;
      ia -= bc.stride_a[d] * bc.out[d];
      ib -= bc.stride_b[d] * bc.out[d];
    }
  }
}

template <class Fwd, class Da, class Db>
Tensor binary_broadcast(const Tensor& a, const Tensor& b, const char* op, Fwd fwd, Da da, Db db) {
  check_defined({&a, &b}, op);
  Broadcast bc = broadcast_shapes(a.shape(), b.shape(), op);
  NodePtr out = fresh(bc.out);
  const float* av = a.values().data();
  const float* bv = b.values().data();
  float* ov = out->value.data();
  for_broadcast(bc, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
    ov[o] = fwd(av[ia], bv[ib]);
  });
  if (trace(out, {&a, &b})) {
    NodePtr an = a.impl(), bn = b.impl(), on = out;
    g_tape->record([an, bn, on, bc, da, db] {
      const float* g = on->grad.data();
      const float* av2 = an->value.data();
      const float* bv2 = bn->value.data();
      float* ga = an->requires_grad ? an->grad.data() : nullptr;
      float* gb = bn->requires_grad ? bn->grad.data() : nullptr;
      for_broadcast(bc, [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
        if (ga) ga[ia] += da(av2[ia], bv2[ib], g[o]);
        if (gb) gb[ib] += db(av2[ia], bv2[ib], g[o]);
      });
    });
  }
  return Tensor::wrap(out);
}

template <class Fwd, class Dx>
Tensor unary_map(const Tensor& a, const char* op, Fwd fwd, Dx dx) {
  check_defined({&a}, op);
  NodePtr out = fresh(a.shape());
  const float* av = a.values().data();
  float* ov = out->value.data();
  const std::int64_t n = a.size();
  for (std::int64_t i = 0; i < n; ++i) ov[i] = fwd(av[i]);
  if (trace(out, {&a})) {
    NodePtr an = a.impl(), on = out;
    g_tape->record([an, on, dx, n] {
      const float* g = on->grad.data();
      const float* x = an->value.data();
      const float* y = on->value.data();
      float* ga = an->grad.data();
      for (std::int64_t i = 0; i < n; ++i) ga[i] += dx(x[i], y[i], g[i]);
    });
  }
  return Tensor::wrap(out);
}

void require_2d(const Tensor& t, const char* op) {
  if (t.shape().size() != 2) {
    throw std::invalid_argument(std::string(op) + ": expected 2-D tensor, got " +
                                shape_str(t.shape()));
  }
}

}  // namespace

std::int64_t numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) {
    if (d < 0) throw std::invalid_argument("negative extent in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

Tensor Tensor::wrap(std::shared_ptr<detail::Node> n) {
  Tensor t;
  t.n_ = std::move(n);
  return t;
}

Tensor Tensor::constant(Shape shape, std::vector<float> values) {
  if (numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw std::invalid_argument("constant: value count does not match shape " + shape_str(shape));
  }
  NodePtr n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  return wrap(n);
}

Tensor Tensor::zeros(Shape shape) {
  const std::int64_t n = numel(shape);
  return constant(std::move(shape), std::vector<float>(static_cast<std::size_t>(n), 0.0f));
}

Tensor Tensor::full(Shape shape, float v) {
  const std::int64_t n = numel(shape);
  return constant(std::move(shape), std::vector<float>(static_cast<std::size_t>(n), v));
}

Tensor Tensor::param(Shape shape, std::vector<float> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.n_->requires_grad = true;
  t.n_->ensure_grad();
  return t;
}

void Tensor::zero_grad() {
  if (n_ && n_->requires_grad) std::fill(n_->grad.begin(), n_->grad.end(), 0.0f);
}

float Tensor::scalar() const {
  if (!n_ || n_->value.size() != 1) {
    throw std::invalid_argument("scalar(): tensor is not a single element");
  }
  return n_->value[0];
}

Tape::Tape() : prev_(g_tape) { g_tape = this; }

Tape::~Tape() { g_tape = prev_; }

Tape* Tape::current() { return g_tape; }

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar tensor");
  }
  if (loss.requires_grad()) loss.impl()->grad[0] = 1.0f;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  steps_.clear();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_defined({&a, &b}, "matmul");
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: inner extents differ, " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  }
  const int rows = a.dim(0), inner = a.dim(1), cols = b.dim(1);
  NodePtr out = fresh({rows, cols});
  mm_nn_acc(a.values().data(), b.values().data(), out->value.data(), rows, inner, cols);
  if (trace(out, {&a, &b})) {
    NodePtr an = a.impl(), bn = b.impl(), on = out;
    g_tape->record([an, bn, on, rows, inner, cols] {
      const float* g = on->grad.data();
      if (an->requires_grad) mm_nt_acc(g, bn->value.data(), an->grad.data(), rows, cols, inner);
      if (bn->requires_grad) mm_tn_acc(an->value.data(), g, bn->grad.data(), rows, inner, cols);
    });
  }
  return Tensor::wrap(out);
}

Tensor matmul_t(const Tensor& a, const Tensor& b) {
  check_defined({&a, &b}, "matmul_t");
  require_2d(a, "matmul_t");
  require_2d(b, "matmul_t");
  if (a.dim(1) != b.dim(1)) {
    throw std::invalid_argument("matmul_t: inner extents differ, " + shape_str(a.shape()) +
                                " x " + shape_str(b.shape()) + "^T");
  }
  const int rows = a.dim(0), inner = a.dim(1), cols = b.dim(0);
  NodePtr out = fresh({rows, cols});
  mm_nt_acc(a.values().data(), b.values().data(), out->value.data(), rows, inner, cols);
  if (trace(out, {&a, &b})) {
    NodePtr an = a.impl(), bn = b.impl(), on = out;
    g_tape->record([an, bn, on, rows, inner, cols] {
      const float* g = on->grad.data();
      if (an->requires_grad) mm_nn_acc(g, bn->value.data(), an->grad.data(), rows, cols, inner);
      if (bn->requires_grad) mm_tn_acc(g, an->value.data(), bn->grad.data(), rows, cols, inner);
    });
  }
  return Tensor::wrap(out);
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_broadcast(
      a, b, "add", [](float x, float y) { return x + y; },
      [](float, float, float g) { return g; }, [](float, float, float g) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_broadcast(
      a, b, "sub", [](float x, float y) { return x - y; },
      [](float, float, float g) { return g; }, [](float, float, float g) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_broadcast(
      a, b, "mul", [](float x, float y) { return x * y; },
      [](float, float y, float g) { return g * y; },
      [](float x, float, float g) { return g * x; });
}

Tensor scale(const Tensor& a, float s) {
  return unary_map(
      a, "scale", [s](float x) { return s * x; },
      [s](float, float, float g) { return s * g; });
}

Tensor add_scalar(const Tensor& a, float s) {
  return unary_map(
      a, "add_scalar", [s](float x) { return x + s; },
      [](float, float, float g) { return g; });
}

Tensor relu(const Tensor& a) {
  return unary_map(
      a, "relu", [](float x) { return x > 0.0f ? x : 0.0f; },
      [](float x, float, float g) { return x > 0.0f ? g : 0.0f; });
}

Tensor exp(const Tensor& a) {
  return unary_map(
      a, "exp", [](float x) { return std::exp(x); },
      [](float, float y, float g) { return g * y; });
}

Tensor log(const Tensor& a) {
  return unary_map(
      a, "log", [](float x) { return std::log(x); },
      [](float x, float, float g) { return g / x; });
}

Tensor square(const Tensor& a) {
  return unary_map(
      a, "square", [](float x) { return x * x; },
      [](float x, float, float g) { return 2.0f * x * g; });
}

Tensor clamp_min(const Tensor& a, float lo) {
  return unary_map(
      a, "clamp_min", [lo](float x) { return x < lo ? lo : x; },
      [lo](float x, float, float g) { return x < lo ? 0.0f : g; });
}

Tensor softmax(const Tensor& a) {
  check_defined({&a}, "softmax");
  if (a.shape().empty()) throw std::invalid_argument("softmax: scalar input");
  const int last = a.shape().back();
  if (last <= 0) throw std::invalid_argument("softmax: empty last axis");
  const std::int64_t rows = a.size() / last;
  NodePtr out = fresh(a.shape());
  const float* x = a.values().data();
  float* y = out->value.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    const float* xr = x + r * last;
    float* yr = y + r * last;
    float mx = xr[0];
    for (int j = 1; j < last; ++j) mx = std::max(mx, xr[j]);
    float denom = 0.0f;
    for (int j = 0; j < last; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      denom += yr[j];
    }
    for (int j = 0; j < last; ++j) yr[j] /= denom;
  }
  if (trace(out, {&a})) {
    NodePtr an = a.impl(), on = out;
    g_tape->record([an, on, rows, last] {
      const float* g = on->grad.data();
      const float* y2 = on->value.data();
      float* ga = an->grad.data();
      for (std::int64_t r = 0; r < rows; ++r) {
        const float* gr = g + r * last;
        const float* yr = y2 + r * last;
        float dot = 0.0f;
        for (int j = 0; j < last; ++j) dot += gr[j] * yr[j];
        float* gar = ga + r * last;
        for (int j = 0; j < last; ++j) gar[j] += yr[j] * (gr[j] - dot);
      }
    });
  }
  return Tensor::wrap(out);
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  for (const Tensor& p : parts) check_defined({&p}, "concat");
  const Shape& ref = parts.front().shape();
  if (ref.empty()) throw std::invalid_argument("concat: scalar input");
  int total_last = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != ref.size() ||
        !std::equal(s.begin(), s.end() - 1, ref.begin(), ref.end() - 1)) {
      throw std::invalid_argument("concat: leading extents differ, " + shape_str(ref) + " vs " +
                                  shape_str(s));
    }
    total_last += s.back();
  }
  Shape out_shape = ref;
  out_shape.back() = total_last;
  NodePtr out = fresh(out_shape);
  const std::int64_t rows = numel(out_shape) / total_last;
  std::int64_t col = 0;
  for (const Tensor& p : parts) {
    const int w = p.shape().back();
    const float* pv = p.values().data();
    for (std::int64_t r = 0; r < rows; ++r) {
      std::copy_n(pv + r * w, w, out->value.data() + r * total_last + col);
    }
    col += w;
  }
  bool any_grad = false;
  for (const Tensor& p : parts) any_grad = any_grad || p.requires_grad();
  if (g_tape != nullptr && any_grad) {
    out->requires_grad = true;
    out->ensure_grad();
    std::vector<NodePtr> ins;
    ins.reserve(parts.size());
    for (const Tensor& p : parts) ins.push_back(p.impl());
    NodePtr on = out;
    g_tape->record([ins, on, rows, total_last] {
      const float* g = on->grad.data();
      std::int64_t col2 = 0;
      for (const NodePtr& in : ins) {
        const int w = in->shape.back();
        if (in->requires_grad) {
          float* gi = in->grad.data();
          for (std::int64_t r = 0; r < rows; ++r) {
            const float* gr = g + r * total_last + col2;
            float* gir = gi + r * w;
            for (int j = 0; j < w; ++j) gir[j] += gr[j];
          }
        }
        col2 += w;
      }
    });
  }
  return Tensor::wrap(out);
}

Tensor slice_last(const Tensor& a, int start, int len) {
  check_defined({&a}, "slice_last");
  if (a.shape().empty()) throw std::invalid_argument("slice_last: scalar input");
  const int last = a.shape().back();
  if (start < 0 || len <= 0 || start + len > last) {
    throw std::invalid_argument("slice_last: range [" + std::to_string(start) + "," +
                                std::to_string(start + len) + ") outside axis of extent " +
                                std::to_string(last));
  }
  Shape out_shape = a.shape();
  out_shape.back() = len;
  NodePtr out = fresh(out_shape);
  const std::int64_t rows = a.size() / last;
  const float* av = a.values().data();
  for (std::int64_t r = 0; r < rows; ++r) {
    std::copy_n(av + r * last + start, len, out->value.data() + r * len);
  }
  if (trace(out, {&a})) {
    NodePtr an = a.impl(), on = out;
    g_tape->record([an, on, rows, last, start, len] {
      const float* g = on->grad.data();
      float* ga = an->grad.data();
      for (std::int64_t r = 0; r < rows; ++r) {
        for (int j = 0; j < len; ++j) ga[r * last + start + j] += g[r * len + j];
      }
    });
  }
  return Tensor::wrap(out);
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& rows) {
  check_defined({&a}, "gather_rows");
  require_2d(a, "gather_rows");
  const int r_in = a.dim(0), cols = a.dim(1);
  for (int r : rows) {
    if (r < 0 || r >= r_in) {
      throw std::invalid_argument("gather_rows: index " + std::to_string(r) +
                                  " outside " + shape_str(a.shape()));
    }
  }
  NodePtr out = fresh({static_cast<int>(rows.size()), cols});
  const float* av = a.values().data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(av + static_cast<std::size_t>(rows[i]) * cols, cols,
                out->value.data() + i * cols);
  }
  if (trace(out, {&a})) {
    NodePtr an = a.impl(), on = out;
    const std::vector<int> idx = rows;
    g_tape->record([an, on, idx, cols] {
      const float* g = on->grad.data();
      float* ga = an->grad.data();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        float* dst = ga + static_cast<std::size_t>(idx[i]) * cols;
        const float* src = g + i * cols;
        for (int j = 0; j < cols; ++j) dst[j] += src[j];
      }
    });
  }
  return Tensor::wrap(out);
}

Tensor reshape(const Tensor& a, Shape shape) {
  check_defined({&a}, "reshape");
  if (numel(shape) != a.size()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " +
                                shape_str(shape));
  }
  NodePtr out = fresh(std::move(shape));
  std::copy(a.values().begin(), a.values().end(), out->value.begin());
  if (trace(out, {&a})) {
    NodePtr an = a.impl(), on = out;
    g_tape->record([an, on] {
      const float* g = on->grad.data();
      float* ga = an->grad.data();
      for (std::size_t i = 0; i < an->grad.size(); ++i) ga[i] += g[i];
    });
  }
  return Tensor::wrap(out);
}

Tensor sum(const Tensor& a) {
  check_defined({&a}, "sum");
  NodePtr out = fresh({1});
  double acc = 0.0;
  for (float v : a.values()) acc += v;
  out->value[0] = static_cast<float>(acc);
  if (trace(out, {&a})) {
    NodePtr an = a.impl(), on = out;
    g_tape->record([an, on] {
      const float g = on->grad[0];
      for (float& gv : an->grad) gv += g;
    });
  }
  return Tensor::wrap(out);
}

Tensor mean(const Tensor& a) {
  check_defined({&a}, "mean");
  if (a.size() == 0) throw std::invalid_argument("mean: empty tensor");
  return scale(sum(a), 1.0f / static_cast<float>(a.size()));
}

bool all_finite(const Tensor& a) {
  for (float v : a.values()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace dimtp::te
