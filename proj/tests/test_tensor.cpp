#include <doctest.h>

#include <cmath>
#include <vector>

#include "dimtp/nn.hpp"
#include "dimtp/rng.hpp"
#include "dimtp/tensor.hpp"
#include "grad_check.hpp"

using namespace dimtp;
using te::Tensor;

namespace {

Tensor random_param(te::Shape shape, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
  std::vector<float> v(static_cast<std::size_t>(te::numel(shape)));
  for (float& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return Tensor::param(std::move(shape), std::move(v));
}

}  // namespace

TEST_CASE("forward op basics") {
  SUBCASE("softmax of a constant row is uniform") {
    const Tensor x = Tensor::full({1, 4}, 2.5f);
    const Tensor y = te::softmax(x);
    for (float v : y.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-6));
  }
  SUBCASE("matmul by identity") {
    const Tensor x = Tensor::constant({2, 3}, {1, 2, 3, 4, 5, 6});
    const Tensor eye = Tensor::constant({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    const Tensor y = te::matmul(x, eye);
    for (int i = 0; i < 6; ++i) CHECK(y.values()[i] == x.values()[i]);
  }
  SUBCASE("concat widths add up") {
    const Tensor a = Tensor::zeros({4, 2});
    const Tensor b = Tensor::zeros({4, 3});
    const Tensor c = te::concat({a, b});
    CHECK(c.shape() == te::Shape{4, 5});
  }
  SUBCASE("shape mismatch names both shapes") {
    const Tensor a = Tensor::zeros({2, 3});
    const Tensor b = Tensor::zeros({4, 5});
    CHECK_THROWS_WITH_AS(te::matmul(a, b), doctest::Contains("(2,3)"), std::invalid_argument);
    try {
      te::add(Tensor::zeros({2, 3}), Tensor::zeros({4, 5}));
      FAIL("expected throw");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("(4,5)") != std::string::npos);
    }
  }
  SUBCASE("broadcast add of a bias row") {
    const Tensor x = Tensor::constant({2, 3}, {0, 1, 2, 3, 4, 5});
    const Tensor b = Tensor::constant({3}, {10, 20, 30});
    const Tensor y = te::add(x, b);
    CHECK(y.values()[0] == 10);
    CHECK(y.values()[4] == 24);
  }
}

TEST_CASE("softmax rows are positive and normalized") {
  Rng rng(5);
  const Tensor x = random_param({7, 9}, rng, -40.0f, 40.0f);
  const Tensor y = te::softmax(x);
  for (int r = 0; r < 7; ++r) {
    double s = 0;
    for (int j = 0; j < 9; ++j) {
      const float v = y.values()[r * 9 + j];
      CHECK(v > 0.0f);
      s += v;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("backward trivials") {
  SUBCASE("sum gives ones") {
    Tensor x = Tensor::param({2, 3}, {1, 2, 3, 4, 5, 6});
    te::Tape tape;
    tape.backward(te::sum(x));
    for (float g : x.grad()) CHECK(g == 1.0f);
  }
  SUBCASE("sum of squares gives 2x") {
    Tensor x = Tensor::param({4}, {1, -2, 3, 0.5f});
    te::Tape tape;
    tape.backward(te::sum(te::square(x)));
    for (int i = 0; i < 4; ++i) CHECK(x.grad()[i] == doctest::Approx(2.0f * x.values()[i]));
  }
  SUBCASE("non-scalar loss is rejected") {
    Tensor x = Tensor::param({4}, {1, 2, 3, 4});
    te::Tape tape;
    Tensor y = te::square(x);
    CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
  }
  SUBCASE("constants receive no gradient buffer") {
    Tensor x = Tensor::param({2}, {1, 2});
    Tensor c = Tensor::constant({2}, {3, 4});
    te::Tape tape;
    tape.backward(te::sum(te::mul(x, c)));
    CHECK(c.grad().empty());
    CHECK(x.grad()[0] == 3.0f);
  }
}

TEST_CASE("finite differences agree for every operator") {
  Rng rng(1234);

  auto run = [&](const char* what, std::vector<Tensor> params,
                 std::function<Tensor()> loss) {
    INFO(what);
    const gradcheck::Report rep = gradcheck::check(std::move(params), loss);
    CHECK(rep.ok());
    if (!rep.ok()) { MESSAGE(what, ": worst ", rep.worst, " at ", rep.worst_at); }
  };

  {
    Tensor a = random_param({3, 4}, rng), b = random_param({4, 2}, rng);
    run("matmul", {a, b}, [=] { return te::sum(te::square(te::matmul(a, b))); });
  }
  {
    Tensor a = random_param({3, 4}, rng), b = random_param({5, 4}, rng);
    run("matmul_t", {a, b}, [=] { return te::sum(te::square(te::matmul_t(a, b))); });
  }
  {
    Tensor a = random_param({2, 3, 4}, rng), b = random_param({4}, rng);
    run("add broadcast", {a, b}, [=] { return te::sum(te::square(te::add(a, b))); });
  }
  {
    Tensor a = random_param({2, 4}, rng), b = random_param({2, 4}, rng);
    run("sub", {a, b}, [=] { return te::sum(te::square(te::sub(a, b))); });
  }
  {
    Tensor a = random_param({2, 4}, rng), b = random_param({1, 4}, rng);
    run("mul broadcast", {a, b}, [=] { return te::sum(te::square(te::mul(a, b))); });
  }
  {
    // Keep inputs clear of the kink so the difference quotient is exact.
    Tensor a = random_param({3, 3}, rng, 0.2f, 1.2f);
    Tensor s = random_param({3, 3}, rng, -1.2f, -0.2f);
    run("relu", {a, s}, [=] { return te::sum(te::square(te::relu(te::mul(a, s)))); });
  }
  {
    Tensor a = random_param({2, 3}, rng, -0.5f, 0.5f);
    run("exp", {a}, [=] { return te::sum(te::exp(a)); });
  }
  {
    Tensor a = random_param({2, 3}, rng, 0.5f, 2.0f);
    run("log", {a}, [=] { return te::sum(te::square(te::log(a))); });
  }
  {
    Tensor a = random_param({5}, rng, 0.5f, 1.5f);
    run("clamp_min inactive", {a}, [=] { return te::sum(te::square(te::clamp_min(a, 0.1f))); });
  }
  {
    Tensor a = random_param({3, 5}, rng);
    Tensor w = random_param({3, 5}, rng);
    run("softmax", {a, w}, [=] { return te::sum(te::mul(w, te::softmax(a))); });
  }
  {
    Tensor a = random_param({3, 2}, rng), b = random_param({3, 3}, rng);
    run("concat+slice", {a, b}, [=] {
      Tensor c = te::concat({a, b});
      return te::sum(te::square(te::slice_last(c, 1, 3)));
    });
  }
  {
    Tensor a = random_param({4, 3}, rng);
    run("gather_rows", {a}, [=] {
      return te::sum(te::square(te::gather_rows(a, {2, 0, 2})));
    });
  }
  {
    Tensor a = random_param({2, 6}, rng);
    run("reshape+mean+scale", {a}, [=] {
      return te::scale(te::mean(te::square(te::reshape(a, {3, 4}))), 2.0f);
    });
  }
  {
    Tensor a = random_param({2, 3}, rng);
    run("add_scalar", {a}, [=] { return te::sum(te::square(te::add_scalar(a, 0.7f))); });
  }
}

TEST_CASE("finite differences agree for a 3-layer mlp") {
  Rng rng(42);
  Mlp mlp = Mlp::create("net", {5, 7, 6, 3}, rng);
  const Tensor x = Tensor::constant({4, 5}, [&] {
    std::vector<float> v(20);
    for (float& f : v) f = static_cast<float>(rng.uniform(-1, 1));
    return v;
  }());
  std::vector<Tensor> params;
  mlp.collect(params);
  const gradcheck::Report rep =
      gradcheck::check(params, [&] { return te::mean(te::square(mlp.forward(x))); });
  CHECK(rep.ok());
  MESSAGE("mlp worst relative error: ", rep.worst);
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor p = Tensor::param({3}, {1, 2, 3});
    Adam opt({p}, 0.1f);
    opt.zero_grad();
    opt.step();
    CHECK(p.values()[0] == 1.0f);
    CHECK(p.values()[2] == 3.0f);
  }
  SUBCASE("first step moves by about -lr * sign(g)") {
    Tensor p = Tensor::param({2}, {0.0f, 0.0f});
    Adam opt({p}, 0.1f);
    opt.zero_grad();
    p.grad_mut()[0] = 0.5f;
    p.grad_mut()[1] = -2.0f;
    opt.step();
    CHECK(p.values()[0] == doctest::Approx(-0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-5));
    CHECK(p.values()[1] == doctest::Approx(+0.1 * 2.0 / (2.0 + 1e-8)).epsilon(1e-5));
  }
  SUBCASE("quadratic loss decreases after warmup") {
    Tensor p = Tensor::param({1}, {5.0f});
    Adam opt({p}, 0.05f);
    std::vector<float> losses;
    for (int i = 0; i < 200; ++i) {
      opt.zero_grad();
      te::Tape tape;
      const Tensor loss = te::sum(te::square(p));
      tape.backward(loss);
      losses.push_back(loss.scalar());
      opt.step();
    }
    for (std::size_t i = 20; i + 1 < losses.size(); ++i) CHECK(losses[i + 1] <= losses[i]);
    CHECK(losses.back() < 0.01f * losses.front());
  }
}

TEST_CASE("multi-step learning rate schedule") {
  const int milestones[] = {160, 300};
  CHECK(lr_at_epoch(1e-4f, milestones, 0) == doctest::Approx(1e-4));
  CHECK(lr_at_epoch(1e-4f, milestones, 200) == doctest::Approx(5e-5));
  CHECK(lr_at_epoch(1e-4f, milestones, 400) == doctest::Approx(2.5e-5));
}

TEST_CASE("training updates are bitwise deterministic under a fixed seed") {
  auto run = [] {
    Rng rng(777);
    Mlp mlp = Mlp::create("net", {4, 16, 4}, rng);
    std::vector<float> xv(8 * 4);
    for (float& v : xv) v = static_cast<float>(rng.uniform(-1, 1));
    const Tensor x = Tensor::constant({8, 4}, xv);
    std::vector<Tensor> params;
    mlp.collect(params);
    Adam opt(params, 1e-2f);
    for (int epoch = 0; epoch < 5; ++epoch) {
      opt.zero_grad();
      te::Tape tape;
      tape.backward(te::mean(te::square(mlp.forward(x))));
      opt.step();
    }
    std::vector<float> flat;
    for (const Tensor& p : params) flat.insert(flat.end(), p.values().begin(), p.values().end());
    return flat;
  };
  const std::vector<float> a = run(), b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}
