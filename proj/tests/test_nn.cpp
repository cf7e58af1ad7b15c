#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sdeop/nn.hpp"
#include "support/test_util.hpp"

using namespace sdeop;
using testutil::random_vector;

TEST_CASE("glorot init is deterministic per seed and respects the bound") {
  const Tensor a = glorot_uniform({100, 100}, 100, 100, 42);
  const Tensor b = glorot_uniform({100, 100}, 100, 100, 42);
  CHECK(a.values() == b.values());

  const Tensor c = glorot_uniform({100, 100}, 100, 100, 43);
  CHECK(a.values() != c.values());

  const double bound = std::sqrt(6.0 / 200.0);
  double mean = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    CHECK(std::fabs(a[i]) <= bound);
    mean += a[i];
  }
  mean /= static_cast<double>(a.size());
  CHECK(std::fabs(mean) < 0.01);
}

TEST_CASE("biases start at exactly zero") {
  const DenseLayer l = make_dense(8, 5, Activation::tanh, 7);
  for (std::int64_t i = 0; i < l.bias.size(); ++i) CHECK(l.bias[i] == 0.0);
}

TEST_CASE("dense stack forward matches a hand computation") {
  DenseLayer l = make_dense(2, 2, Activation::identity, 1);
  l.weight.values() = {1.0, 2.0, 3.0, 4.0};  // [out,in]
  l.bias.values() = {0.5, -0.5};
  const Tensor x({1, 2}, {1.0, -1.0});
  const Tensor y = dense_apply(l, x);
  CHECK(y[0] == doctest::Approx(1.0 - 2.0 + 0.5));
  CHECK(y[1] == doctest::Approx(3.0 - 4.0 - 0.5));
}

TEST_CASE("mlp gradients pass the finite-difference oracle") {
  const Mlp net = make_mlp({3, 8, 8, 2}, Activation::tanh, Activation::identity, 5);
  const Tensor x({4, 3}, random_vector(12, 9));
  std::vector<Tensor> params;
  for (const auto& l : net.layers) {
    params.push_back(l.weight);
    params.push_back(l.bias);
  }
  const double err = grad_check(
      [&](const std::vector<Tensor>& p) {
        Mlp m;
        for (std::size_t i = 0; i < p.size(); i += 2) {
          m.layers.push_back({p[i], p[i + 1],
                              i + 2 == p.size() ? Activation::identity : Activation::tanh});
        }
        return mean(square(mlp_apply(m, x)));
      },
      params, 1e-5);
  CHECK(err < 1e-5);
}

TEST_CASE("l1 penalty values and subgradient") {
  CHECK(l1_penalty({Tensor({2}, {1, -2}), Tensor({1}, {3})}).item() == doctest::Approx(6.0));
  CHECK(l1_penalty({Tensor({4})}).item() == doctest::Approx(0.0));

  Graph g;
  const Tensor v = g.leaf(Tensor({2}, {2.0, -3.0}), "v");
  const Gradients grads = g.backward(l1_penalty({v}));
  CHECK(grads.at("v")[0] == doctest::Approx(1.0));
  CHECK(grads.at("v")[1] == doctest::Approx(-1.0));
}

TEST_CASE("l1 penalty is positively homogeneous") {
  const auto vals = random_vector(32, 77);
  const Tensor v({32}, vals);
  for (const double c : {-2.5, -0.3, 0.0, 0.7, 4.0}) {
    const double lhs = l1_penalty({mul(v, c)}).item();
    const double rhs = std::fabs(c) * l1_penalty({v}).item();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("adam leaves parameters unchanged on zero gradients") {
  ParamList params{{"p", Tensor({3}, {1.0, 2.0, 3.0})}};
  Gradients grads;
  grads.by_name.emplace("p", Tensor({3}));
  Adam opt;
  opt.step(params, grads);
  CHECK(params[0].tensor[0] == 1.0);
  CHECK(params[0].tensor[1] == 2.0);
  CHECK(params[0].tensor[2] == 3.0);
}

TEST_CASE("first adam step moves by about the learning rate") {
  // Hand evaluation at t=1: mhat = g, vhat = g^2, step = lr*g/(|g|+eps).
  ParamList params{{"p", Tensor({1}, {0.0})}};
  Gradients grads;
  grads.by_name.emplace("p", Tensor({1}, {1.0}));
  Adam opt(AdamConfig{1e-3, 0.9, 0.999, 1e-8});
  opt.step(params, grads);
  CHECK(params[0].tensor[0] == doctest::Approx(-1e-3).epsilon(1e-6));
}

TEST_CASE("identical states and gradients give identical adam results") {
  auto run = [] {
    ParamList params{{"p", Tensor({4}, {0.1, -0.2, 0.3, -0.4})}};
    Adam opt;
    for (int i = 0; i < 10; ++i) {
      Gradients grads;
      grads.by_name.emplace("p", Tensor({4}, {0.5, -1.0, 2.0, 0.25}));
      opt.step(params, grads);
    }
    return params[0].tensor.values();
  };
  CHECK(run() == run());
}

TEST_CASE("with a constant gradient the adam step size approaches lr") {
  ParamList params{{"p", Tensor({1}, {0.0})}};
  Adam opt(AdamConfig{1e-3, 0.9, 0.999, 1e-8});
  double prev = 0.0;
  double step = 0.0;
  for (int i = 0; i < 500; ++i) {
    Gradients grads;
    grads.by_name.emplace("p", Tensor({1}, {3.7}));
    opt.step(params, grads);
    step = std::fabs(params[0].tensor[0] - prev);
    prev = params[0].tensor[0];
  }
  CHECK(step == doctest::Approx(1e-3).epsilon(0.01));
}

TEST_CASE("adam reports the offending parameter on a non-finite gradient") {
  ParamList params{{"enc.w", Tensor({2}, {0.0, 0.0})}};
  Gradients grads;
  grads.by_name.emplace("enc.w", Tensor({2}, {1.0, std::nan("")}));
  Adam opt;
  try {
    opt.step(params, grads);
    FAIL("expected throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("enc.w") != std::string::npos);
  }
}

TEST_CASE("conv layer wraps conv1d/conv2d with activation") {
  const ConvLayer c1 = make_conv1d(1, 4, 3, 1, Activation::relu, 3);
  const Tensor x({2, 1, 10}, random_vector(20, 13));
  const Tensor y = conv_apply(c1, x);
  CHECK(y.shape() == Shape{2, 4, 8});
  for (std::int64_t i = 0; i < y.size(); ++i) CHECK(y[i] >= 0.0);

  const ConvLayer c2 = make_conv2d(1, 3, 2, 2, 1, Activation::identity, 4);
  const Tensor x2({1, 1, 5, 5}, random_vector(25, 14));
  CHECK(conv_apply(c2, x2).shape() == Shape{1, 3, 4, 4});
}
