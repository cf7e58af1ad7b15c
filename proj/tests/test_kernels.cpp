#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sdeop/kernels.hpp"
#include "support/test_util.hpp"

using namespace sdeop;
using testutil::random_vector;

namespace {

// Sizes chosen to exercise full vector blocks, remainders and empty input.
const std::int64_t kSizes[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 64, 100, 257};

bool have_avx2() {
  for (const auto& name : kernels::available()) {
    if (name == "avx2") return true;
  }
  return false;
}

}  // namespace

TEST_CASE("scalar table is always available") {
  const auto names = kernels::available();
  REQUIRE(!names.empty());
  CHECK(names[0] == "scalar");
  CHECK(std::string(kernels::scalar_table().name) == "scalar");
}

TEST_CASE("vector variants agree with the scalar reference") {
  if (!have_avx2()) return;
  const auto& ref = kernels::scalar_table();
  kernels::set_active("avx2");
  const auto& vec = kernels::active();
  REQUIRE(std::string(vec.name) == "avx2");

  for (const std::int64_t n : kSizes) {
    const auto a = random_vector(n, 1000 + n, -2.0, 2.0);
    const auto b = random_vector(n, 2000 + n, -2.0, 2.0);

    // Reductions: accumulation order differs, allow roundoff-level slack.
    const double tol = 1e-12 * (1.0 + static_cast<double>(n));
    CHECK(std::fabs(ref.dot(a.data(), b.data(), n) - vec.dot(a.data(), b.data(), n)) <= tol);
    CHECK(std::fabs(ref.sum(a.data(), n) - vec.sum(a.data(), n)) <= tol);
    CHECK(std::fabs(ref.abs_sum(a.data(), n) - vec.abs_sum(a.data(), n)) <= tol);
    CHECK(std::fabs(ref.sq_diff_sum(a.data(), b.data(), n) -
                    vec.sq_diff_sum(a.data(), b.data(), n)) <= tol);

    std::vector<double> r1(n), r2(n);
    ref.add(a.data(), b.data(), r1.data(), n);
    vec.add(a.data(), b.data(), r2.data(), n);
    CHECK(r1 == r2);
    ref.sub(a.data(), b.data(), r1.data(), n);
    vec.sub(a.data(), b.data(), r2.data(), n);
    CHECK(r1 == r2);
    ref.mul(a.data(), b.data(), r1.data(), n);
    vec.mul(a.data(), b.data(), r2.data(), n);
    CHECK(r1 == r2);
    ref.scale(a.data(), 1.7, r1.data(), n);
    vec.scale(a.data(), 1.7, r2.data(), n);
    CHECK(r1 == r2);
    ref.relu(a.data(), r1.data(), n);
    vec.relu(a.data(), r2.data(), n);
    CHECK(r1 == r2);

    auto y1 = random_vector(n, 3000 + n);
    auto y2 = y1;
    ref.axpy(0.37, a.data(), y1.data(), n);
    vec.axpy(0.37, a.data(), y2.data(), n);
    CHECK(testutil::max_abs_diff(y1, y2) <= 1e-15);

    auto g1 = random_vector(n, 4000 + n);
    auto g2 = g1;
    ref.relu_grad(a.data(), b.data(), g1.data(), n);
    vec.relu_grad(a.data(), b.data(), g2.data(), n);
    CHECK(g1 == g2);

    auto h1 = random_vector(n, 5000 + n);
    auto h2 = h1;
    ref.tanh_grad(a.data(), b.data(), h1.data(), n);
    vec.tanh_grad(a.data(), b.data(), h2.data(), n);
    CHECK(testutil::max_abs_diff(h1, h2) <= 1e-15);

    auto s1 = random_vector(n, 6000 + n);
    auto s2 = s1;
    ref.sign_axpy(0.37, a.data(), s1.data(), n);
    vec.sign_axpy(0.37, a.data(), s2.data(), n);
    CHECK(s1 == s2);

    auto p1 = random_vector(n, 7000 + n), m1 = random_vector(n, 7100 + n, 0.0, 1.0),
         v1 = random_vector(n, 7200 + n, 0.0, 1.0);
    auto p2 = p1, m2 = m1, v2 = v1;
    ref.adam_update(p1.data(), m1.data(), v1.data(), a.data(), n, 1e-3, 0.9, 0.999, 1e-8, 10.0,
                    1000.0);
    vec.adam_update(p2.data(), m2.data(), v2.data(), a.data(), n, 1e-3, 0.9, 0.999, 1e-8, 10.0,
                    1000.0);
    CHECK(testutil::max_abs_diff(p1, p2) <= 1e-15);
    CHECK(testutil::max_abs_diff(m1, m2) <= 1e-15);
    CHECK(testutil::max_abs_diff(v1, v2) <= 1e-15);
  }
  kernels::set_active("scalar");
  CHECK(std::string(kernels::active().name) == "scalar");
  kernels::set_active(have_avx2() ? "avx2" : "scalar");
}

TEST_CASE("kernel semantics on hand values") {
  const auto& kt = kernels::scalar_table();
  const double a[] = {1.0, -2.0, 3.0};
  const double b[] = {4.0, 5.0, -6.0};
  CHECK(kt.dot(a, b, 3) == doctest::Approx(1 * 4 - 2 * 5 - 3 * 6));
  CHECK(kt.sum(a, 3) == doctest::Approx(2.0));
  CHECK(kt.abs_sum(a, 3) == doctest::Approx(6.0));
  CHECK(kt.sq_diff_sum(a, b, 3) == doctest::Approx(9.0 + 49.0 + 81.0));

  double r[3];
  kt.relu(a, r, 3);
  CHECK(r[0] == 1.0);
  CHECK(r[1] == 0.0);
  CHECK(r[2] == 3.0);

  // sign(0) contributes nothing.
  double y[] = {0.0, 0.0, 0.0};
  const double x[] = {2.0, 0.0, -5.0};
  kt.sign_axpy(1.5, x, y, 3);
  CHECK(y[0] == 1.5);
  CHECK(y[1] == 0.0);
  CHECK(y[2] == -1.5);
}

TEST_CASE("set_active rejects unknown tables") {
  CHECK_THROWS(kernels::set_active("neon"));
}
