#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sdeop/nn.hpp"
#include "sdeop/tensor.hpp"
#include "support/test_util.hpp"

using namespace sdeop;
using testutil::random_vector;

TEST_CASE("matmul identity and hand arithmetic") {
  const Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Tensor b({3, 2}, random_vector(6, 7));
  const Tensor prod = matmul(eye, b);
  for (std::int64_t i = 0; i < 6; ++i) CHECK(prod[i] == doctest::Approx(b[i]));

  const Tensor a({2, 2}, {1, 2, 3, 4});
  const Tensor c({2, 1}, {5, 6});
  const Tensor r = matmul(a, c);
  CHECK(r[0] == doctest::Approx(17));
  CHECK(r[1] == doctest::Approx(39));
}

TEST_CASE("matmul shape error names both shapes") {
  const Tensor a({2, 3});
  const Tensor b({2, 2});
  try {
    (void)matmul(a, b);
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[2,2]") != std::string::npos);
  }
}

TEST_CASE("gradient of sum(A*B) w.r.t. A equals ones * B^T") {
  const Tensor b({3, 2}, random_vector(6, 11));
  const Tensor a0({2, 3}, random_vector(6, 12));

  Graph g;
  const Tensor a = g.leaf(a0, "a");
  const Gradients grads = g.backward(sum(matmul(a, b)));
  const Tensor& ga = grads.at("a");
  // d/dA[i,k] sum_j (A B)[i,j] = sum_j B[k,j]
  for (std::int64_t i = 0; i < 2; ++i) {
    for (std::int64_t k = 0; k < 3; ++k) {
      CHECK(ga[i * 3 + k] == doctest::Approx(b[k * 2] + b[k * 2 + 1]));
    }
  }

  // Same thing through the central-difference oracle.
  const double err = grad_check(
      [&](const std::vector<Tensor>& p) { return sum(matmul(p[0], b)); }, {a0}, 1e-6);
  CHECK(err < 1e-7);
}

TEST_CASE("conv1d identity kernel and hand arithmetic") {
  const Tensor x({1, 5}, {1, 2, 3, 4, 5});
  const Tensor delta({1, 1, 1}, {1.0});
  const Tensor same = conv1d(x, delta, 1);
  CHECK(same.shape() == Shape{1, 5});
  for (int i = 0; i < 5; ++i) CHECK(same[i] == doctest::Approx(x[i]));

  const Tensor x2({1, 4}, {1, 2, 3, 4});
  const Tensor k2({1, 1, 2}, {1, 1});
  const Tensor r = conv1d(x2, k2, 1);
  CHECK(r.shape() == Shape{1, 3});
  CHECK(r[0] == doctest::Approx(3));
  CHECK(r[1] == doctest::Approx(5));
  CHECK(r[2] == doctest::Approx(7));
}

TEST_CASE("conv1d kernel wider than input fails") {
  CHECK_THROWS(conv1d(Tensor({1, 3}), Tensor({1, 1, 4}), 1));
}

TEST_CASE("conv1d gradients match finite differences") {
  const Tensor x0({2, 9}, random_vector(18, 21));
  const Tensor k0({3, 2, 4}, random_vector(24, 22));
  for (const std::int64_t stride : {1, 2}) {
    const double err = grad_check(
        [&](const std::vector<Tensor>& p) { return sum(square(conv1d(p[0], p[1], stride))); },
        {x0, k0}, 1e-6);
    CHECK(err < 1e-6);
  }
}

TEST_CASE("conv2d unit kernel, all-ones kernel and gradients") {
  const Tensor x({1, 2, 2}, {1, 2, 3, 4});
  const Tensor unit({1, 1, 1, 1}, {1.0});
  const Tensor same = conv2d(x, unit, 1);
  for (int i = 0; i < 4; ++i) CHECK(same[i] == doctest::Approx(x[i]));

  const Tensor ones({1, 1, 2, 2}, {1, 1, 1, 1});
  const Tensor r = conv2d(x, ones, 1);
  CHECK(r.shape() == Shape{1, 1, 1});
  CHECK(r[0] == doctest::Approx(10));

  const Tensor x0({2, 5, 6}, random_vector(60, 31));
  const Tensor k0({2, 2, 3, 3}, random_vector(36, 32));
  for (const std::int64_t stride : {1, 2}) {
    const double err = grad_check(
        [&](const std::vector<Tensor>& p) { return sum(square(conv2d(p[0], p[1], stride))); },
        {x0, k0}, 1e-6);
    CHECK(err < 1e-6);
  }
}

TEST_CASE("conv output length matches the closed form") {
  for (std::int64_t len = 1; len <= 12; ++len) {
    for (std::int64_t w = 1; w <= len; ++w) {
      for (std::int64_t stride = 1; stride <= 3; ++stride) {
        const Tensor x({1, len}, random_vector(len, 100 * len + w));
        const Tensor k({1, 1, w}, random_vector(w, 200 * w + stride));
        const Tensor y = conv1d(x, k, stride);
        CHECK(y.extent(1) == (len - w) / stride + 1);
      }
    }
  }
}

TEST_CASE("elementwise forward values") {
  const Tensor r = relu(Tensor({3}, {-1, 0, 2}));
  CHECK(r[0] == 0);
  CHECK(r[1] == 0);
  CHECK(r[2] == 2);

  CHECK(mean(Tensor({3}, {2, 4, 6})).item() == doctest::Approx(4));

  // tanh'(0) = 1
  Graph g;
  const Tensor x = g.leaf(Tensor({1}, {0.0}), "x");
  const Gradients grads = g.backward(sum(tanh(x)));
  CHECK(grads.at("x")[0] == doctest::Approx(1.0));
}

TEST_CASE("non-broadcastable elementwise shapes fail") {
  CHECK_THROWS(add(Tensor({2, 3}), Tensor({3, 2})));
  CHECK_THROWS(mul(Tensor({4}), Tensor({5})));
}

TEST_CASE("backward on sum and sum of squares") {
  {
    Graph g;
    const Tensor p = g.leaf(Tensor({4}, {0.3, -0.7, 1.1, 0.0}), "p");
    const Gradients grads = g.backward(sum(p));
    for (int i = 0; i < 4; ++i) CHECK(grads.at("p")[i] == doctest::Approx(1.0));
  }
  {
    Graph g;
    const Tensor p = g.leaf(Tensor({2}, {1.0, -2.0}), "p");
    const Gradients grads = g.backward(sum(square(p)));
    CHECK(grads.at("p")[0] == doctest::Approx(2.0));
    CHECK(grads.at("p")[1] == doctest::Approx(-4.0));
  }
}

TEST_CASE("backward rejects non-scalar losses and double use") {
  Graph g;
  const Tensor p = g.leaf(Tensor({3}, {1, 2, 3}), "p");
  const Tensor y = square(p);
  CHECK_THROWS(g.backward(y));

  Graph g2;
  const Tensor q = g2.leaf(Tensor({3}, {1, 2, 3}), "q");
  const Tensor loss = sum(square(q));
  (void)g2.backward(loss);
  CHECK_THROWS(g2.backward(loss));
}

TEST_CASE("backward of a sum of losses equals the sum of backwards") {
  const Tensor p0({5}, random_vector(5, 41));
  auto loss_a = [](const Tensor& p) { return sum(square(p)); };
  auto loss_b = [](const Tensor& p) { return mean(mul(p, p)); };

  Graph ga, gb, gc;
  const Gradients da = ga.backward(loss_a(ga.leaf(p0, "p")));
  const Gradients db = gb.backward(loss_b(gb.leaf(p0, "p")));
  const Tensor pc = gc.leaf(p0, "p");
  const Gradients dc = gc.backward(add(loss_a(pc), loss_b(pc)));
  for (int i = 0; i < 5; ++i) {
    CHECK(dc.at("p")[i] == doctest::Approx(da.at("p")[i] + db.at("p")[i]).epsilon(1e-12));
  }
}

TEST_CASE("every elementwise backward passes grad_check on random inputs") {
  const Tensor a0({7}, random_vector(7, 51));
  const Tensor b0({7}, random_vector(7, 52));
  const Tensor target({7}, random_vector(7, 53));  // not among the checked params
  using Fn = std::function<Tensor(const std::vector<Tensor>&)>;
  const std::vector<std::pair<const char*, Fn>> cases = {
      {"add", [](const std::vector<Tensor>& p) { return sum(square(add(p[0], p[1]))); }},
      {"sub", [](const std::vector<Tensor>& p) { return sum(square(sub(p[0], p[1]))); }},
      {"mul", [](const std::vector<Tensor>& p) { return sum(square(mul(p[0], p[1]))); }},
      {"square", [](const std::vector<Tensor>& p) { return sum(square(square(p[0]))); }},
      {"tanh", [](const std::vector<Tensor>& p) { return sum(square(tanh(p[0]))); }},
      {"mean", [](const std::vector<Tensor>& p) { return mean(mul(p[0], p[1])); }},
      {"scale", [](const std::vector<Tensor>& p) { return sum(mul(p[0], 2.5)); }},
      {"add_scalar", [](const std::vector<Tensor>& p) { return sum(square(add(p[0], 0.7))); }},
      {"matmul_nt",
       [](const std::vector<Tensor>& p) {
         return sum(square(matmul_nt(reshape(p[0], {7, 1}), reshape(p[1], {7, 1}))));
       }},
      {"mse", [&](const std::vector<Tensor>& p) { return mse(p[0], target); }},
  };
  for (const auto& [name, fn] : cases) {
    INFO(std::string(name));
    CHECK(grad_check(fn, {a0, b0}, 1e-5) < 1e-5);
  }
  // relu and abs_sum carry kinks at 0; check them on inputs bounded away.
  const Tensor away({4}, {0.5, -0.7, 1.2, -0.1});
  CHECK(grad_check(
            [](const std::vector<Tensor>& p) { return sum(square(relu(p[0]))); }, {away}, 1e-5) <
        1e-5);
  CHECK(grad_check([](const std::vector<Tensor>& p) { return abs_sum(p[0]); }, {away}, 1e-5) <
        1e-5);
}

TEST_CASE("grad_check calibration cases") {
  // Quadratic: autodiff and central differences are both near-exact.
  const Tensor q0({3}, {0.2, -0.4, 0.9});
  CHECK(grad_check([](const std::vector<Tensor>& p) { return sum(square(p[0])); }, {q0}, 1e-5) <
        1e-8);
  // Constant function: zero gradient on both routes.
  CHECK(grad_check([](const std::vector<Tensor>& p) { return mul(sum(mul(p[0], 0.0)), 1.0); },
                   {q0}, 1e-5) == doctest::Approx(0.0));
  // Randomly initialized 2-layer tanh network.
  const DenseLayer l1 = make_dense(4, 6, Activation::tanh, 7);
  const DenseLayer l2 = make_dense(6, 1, Activation::identity, 8);
  const Tensor x({2, 4}, random_vector(8, 61));
  const double err = grad_check(
      [&](const std::vector<Tensor>& p) {
        DenseLayer a{p[0], p[1], Activation::tanh};
        DenseLayer b{p[2], p[3], Activation::identity};
        return mean(square(dense_apply(b, dense_apply(a, x))));
      },
      {l1.weight, l1.bias, l2.weight, l2.bias}, 1e-5);
  CHECK(err < 1e-5);
}

TEST_CASE("reshape is a metadata view sharing the tape node") {
  Graph g;
  const Tensor p = g.leaf(Tensor({6}, {1, 2, 3, 4, 5, 6}), "p");
  const Tensor m = reshape(p, {2, 3});
  CHECK(m.node() == p.node());
  const Gradients grads = g.backward(sum(square(m)));
  for (int i = 0; i < 6; ++i) CHECK(grads.at("p")[i] == doctest::Approx(2.0 * (i + 1)));
  CHECK_THROWS(reshape(p, {4, 2}));
}

TEST_CASE("operands from different graphs are rejected") {
  Graph g1, g2;
  const Tensor a = g1.leaf(Tensor({2}, {1, 2}), "a");
  const Tensor b = g2.leaf(Tensor({2}, {3, 4}), "b");
  CHECK_THROWS(add(a, b));
}

TEST_CASE("forward values stay finite on finite inputs") {
  const Tensor a({64}, random_vector(64, 71, -3.0, 3.0));
  const Tensor b({64}, random_vector(64, 72, -3.0, 3.0));
  CHECK(add(a, b).all_finite());
  CHECK(mul(a, b).all_finite());
  CHECK(tanh(a).all_finite());
  CHECK(relu(a).all_finite());
  CHECK(matmul_nt(reshape(a, {8, 8}), reshape(b, {8, 8})).all_finite());
}
