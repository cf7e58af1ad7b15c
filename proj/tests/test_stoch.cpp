#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sdeop/stoch.hpp"
#include "support/test_util.hpp"

#if defined(SDEOP_HAVE_EIGEN)
#include <Eigen/Dense>
#endif

using namespace sdeop;

namespace {

double frob_rel(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("gram matrix basics") {
  const SensorGrid grid = SensorGrid::line(0.0, 2.0, 3);  // {0, 1, 2}
  const KernelSpec se{KernelFamily::squared_exponential, 1.0, 1.0};
  const auto k = gram_matrix(se, grid);
  CHECK(k[0 * 3 + 1] == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  CHECK(k[0 * 3 + 2] == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
  for (int i = 0; i < 3; ++i) {
    CHECK(k[i * 3 + i] == doctest::Approx(1.0));
    for (int j = 0; j < 3; ++j) CHECK(k[i * 3 + j] == k[j * 3 + i]);
  }

  const KernelSpec zero{KernelFamily::squared_exponential, 0.0, 1.0};
  for (const double v : gram_matrix(zero, grid)) CHECK(v == 0.0);

  const KernelSpec ex{KernelFamily::exponential, 2.0, 0.5};
  const auto ke = gram_matrix(ex, grid);
  CHECK(ke[0 * 3 + 0] == doctest::Approx(4.0));
  CHECK(ke[0 * 3 + 1] == doctest::Approx(4.0 * std::exp(-2.0)).epsilon(1e-12));
}

TEST_CASE("gp_sample with sigma=0 reproduces the mean function") {
  const SensorGrid grid = SensorGrid::line(0.0, 1.0, 7);
  const KernelSpec zero{KernelFamily::squared_exponential, 0.0, 1.0};
  const auto mean = [](const double* x) { return 2.0 + x[0]; };
  const FunctionEnsemble e = gp_sample(mean, zero, grid, 5, 9);
  for (std::int64_t s = 0; s < 5; ++s) {
    for (std::int64_t j = 0; j < 7; ++j) {
      CHECK(e.sample(s)[j] == doctest::Approx(2.0 + grid.coords[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("gp_sample is deterministic per seed") {
  const SensorGrid grid = SensorGrid::line(0.0, 1.0, 6);
  const KernelSpec se{KernelFamily::squared_exponential, 1.0, 1.5};
  const FunctionEnsemble a = gp_sample(MeanFn{}, se, grid, 4, 123);
  const FunctionEnsemble b = gp_sample(MeanFn{}, se, grid, 4, 123);
  const FunctionEnsemble c = gp_sample(MeanFn{}, se, grid, 4, 124);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);
}

TEST_CASE("gp_sample empirical covariance matches the gram matrix") {
  // Monte-Carlo oracle: 2e5 draws on a 5-point grid, 3% Frobenius-relative.
  const SensorGrid grid = SensorGrid::line(0.0, 1.0, 5);
  const KernelSpec se{KernelFamily::squared_exponential, 1.0, 1.5};
  const std::int64_t n = 200000;
  const FunctionEnsemble e = gp_sample(MeanFn{}, se, grid, n, 7);

  std::vector<double> cov(25, 0.0);
  std::vector<double> mean(5, 0.0);
  for (std::int64_t s = 0; s < n; ++s) {
    for (int j = 0; j < 5; ++j) mean[j] += e.sample(s)[j];
  }
  for (double& v : mean) v /= static_cast<double>(n);
  for (std::int64_t s = 0; s < n; ++s) {
    const double* row = e.sample(s);
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) {
        cov[i * 5 + j] += (row[i] - mean[i]) * (row[j] - mean[j]);
      }
    }
  }
  for (double& v : cov) v /= static_cast<double>(n - 1);
  CHECK(frob_rel(cov, gram_matrix(se, grid)) < 0.03);

  // Sample mean within Monte-Carlo confidence of the zero mean function:
  // per-sensor std is 1, so 3 sigma of the mean estimate is 3/sqrt(n).
  for (int j = 0; j < 5; ++j) CHECK(std::fabs(mean[j]) < 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("gp_sample_grid2d matches the dense 2-D gram matrix") {
  const SensorGrid xs = SensorGrid::line(0.0, 1.0, 3);
  const SensorGrid ys = SensorGrid::line(0.0, 1.0, 2);
  const KernelSpec se{KernelFamily::squared_exponential, 0.7, 0.8};
  const std::int64_t n = 200000;
  const FunctionEnsemble e = gp_sample_grid2d(MeanFn{}, se, xs, ys, n, 21);
  const std::int64_t m = 6;
  std::vector<double> cov(m * m, 0.0), mean(m, 0.0);
  for (std::int64_t s = 0; s < n; ++s) {
    for (std::int64_t j = 0; j < m; ++j) mean[j] += e.sample(s)[j];
  }
  for (double& v : mean) v /= static_cast<double>(n);
  for (std::int64_t s = 0; s < n; ++s) {
    const double* row = e.sample(s);
    for (std::int64_t i = 0; i < m; ++i) {
      for (std::int64_t j = 0; j < m; ++j) {
        cov[i * m + j] += (row[i] - mean[i]) * (row[j] - mean[j]);
      }
    }
  }
  for (double& v : cov) v /= static_cast<double>(n - 1);
  CHECK(frob_rel(cov, gram_matrix(se, e.grid)) < 0.03);
}

TEST_CASE("kl_modes spectral identities") {
  const SensorGrid grid = SensorGrid::line(-1.0, 1.0, 41);
  const KernelSpec se{KernelFamily::squared_exponential, 1.0, 1.5};
  const std::int64_t n = grid.size();
  const KLBasis full = kl_modes(se, grid, n);

  for (std::int64_t k = 0; k + 1 < n; ++k) {
    CHECK(full.eigenvalues[k] >= full.eigenvalues[k + 1]);
  }
  CHECK(full.eigenvalues[n - 1] >= 0.0);

  // Full-mode reconstruction sum lambda_i e_i e_i^T reproduces K.
  const auto gram = gram_matrix(se, grid);
  std::vector<double> recon(n * n, 0.0);
  for (std::int64_t k = 0; k < n; ++k) {
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < n; ++j) {
        recon[i * n + j] +=
            full.eigenvalues[k] * full.eigenfunction(i, k) * full.eigenfunction(j, k);
      }
    }
  }
  CHECK(frob_rel(recon, gram) < 1e-8);

  // Trace identity: sum of eigenvalues equals the weighted trace of K.
  double tr = 0.0;
  for (std::int64_t i = 0; i < n; ++i) tr += grid.quad_weights[i] * gram[i * n + i];
  double se_sum = 0.0;
  for (const double l : full.eigenvalues) se_sum += l;
  CHECK(std::fabs(se_sum - tr) / tr < 1e-8);

  // Orthonormality under the quadrature weights.
  for (std::int64_t a = 0; a < 6; ++a) {
    for (std::int64_t b = 0; b <= a; ++b) {
      double ip = 0.0;
      for (std::int64_t i = 0; i < n; ++i) {
        ip += grid.quad_weights[i] * full.eigenfunction(i, a) * full.eigenfunction(i, b);
      }
      CHECK(std::fabs(ip - (a == b ? 1.0 : 0.0)) < 1e-8);
    }
  }

  // Sign convention: the first visible entry of each mode is positive.
  for (std::int64_t k = 0; k < 6; ++k) {
    for (std::int64_t i = 0; i < n; ++i) {
      const double v = full.eigenfunction(i, k);
      if (std::fabs(v) > 1e-12) {
        CHECK(v > 0.0);
        break;
      }
    }
  }

  CHECK_THROWS(kl_modes(se, grid, n + 1));
}

TEST_CASE("top-5 modes capture at least 99% of the trace on a 101-point grid") {
  const SensorGrid grid = SensorGrid::line(-1.0, 1.0, 101);
  const KernelSpec se{KernelFamily::squared_exponential, 1.0, 1.5};
  const KLBasis basis = kl_modes(se, grid, 5);
  const auto gram = gram_matrix(se, grid);
  double tr = 0.0;
  for (std::int64_t i = 0; i < grid.size(); ++i) tr += grid.quad_weights[i] * gram[i * 101 + i];
  double top = 0.0;
  for (const double l : basis.eigenvalues) top += l;
  CHECK(top / tr >= 0.99);

#if defined(SDEOP_HAVE_EIGEN)
  // Independent dense eigendecomposition oracle.
  const std::int64_t n = grid.size();
  Eigen::MatrixXd b(n, n);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      b(i, j) = std::sqrt(grid.quad_weights[i]) * gram[i * n + j] * std::sqrt(grid.quad_weights[j]);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
  for (int k = 0; k < 5; ++k) {
    const double oracle = eig.eigenvalues()(n - 1 - k);
    CHECK(basis.eigenvalues[k] == doctest::Approx(oracle).epsilon(1e-9));
  }
#endif
}

TEST_CASE("kl_field_sample scales and stores its latent draws") {
  const SensorGrid grid = SensorGrid::line(0.0, 0.1, 46);
  const KernelSpec ex{KernelFamily::exponential, 1.0, 0.25};
  const KLBasis basis = kl_modes(ex, grid, 3);

  const FunctionEnsemble zero = kl_field_sample(basis, 0.0, 3, 5);
  for (const double v : zero.values) CHECK(v == 0.0);

  // One retained mode: sample = sigma*sqrt(l1)*e1*w with w recorded.
  const KLBasis one = kl_modes(ex, grid, 1);
  const FunctionEnsemble e1 = kl_field_sample(one, 0.1, 4, 6);
  REQUIRE(e1.latent_dim == 1);
  for (std::int64_t s = 0; s < 4; ++s) {
    const double w = e1.latents[s];
    for (std::int64_t j = 0; j < grid.size(); ++j) {
      const double want = 0.1 * std::sqrt(one.eigenvalues[0]) * one.eigenfunction(j, 0) * w;
      CHECK(e1.sample(s)[j] == doctest::Approx(want).epsilon(1e-12));
    }
  }

  // Empirical covariance converges to the truncated kernel, not the full one.
  const std::int64_t n = 100000;
  const FunctionEnsemble big = kl_field_sample(basis, 0.1, n, 7);
  const std::int64_t m = grid.size();
  std::vector<double> trunc(m * m, 0.0);
  for (std::int64_t k = 0; k < 3; ++k) {
    for (std::int64_t i = 0; i < m; ++i) {
      for (std::int64_t j = 0; j < m; ++j) {
        trunc[i * m + j] += 0.01 * basis.eigenvalues[k] * basis.eigenfunction(i, k) *
                            basis.eigenfunction(j, k);
      }
    }
  }
  std::vector<double> cov(m * m, 0.0), mean(m, 0.0);
  for (std::int64_t s = 0; s < n; ++s) {
    for (std::int64_t j = 0; j < m; ++j) mean[j] += big.sample(s)[j];
  }
  for (double& v : mean) v /= static_cast<double>(n);
  for (std::int64_t s = 0; s < n; ++s) {
    const double* row = big.sample(s);
    for (std::int64_t i = 0; i < m; ++i) {
      for (std::int64_t j = 0; j < m; ++j) {
        cov[i * m + j] += (row[i] - mean[i]) * (row[j] - mean[j]);
      }
    }
  }
  for (double& v : cov) v /= static_cast<double>(n - 1);
  CHECK(frob_rel(cov, trunc) < 0.03);
}

TEST_CASE("kl_project recovers the latent weights of a KL field") {
  const SensorGrid grid = SensorGrid::line(0.0, 1.0, 64);
  const KernelSpec se{KernelFamily::squared_exponential, 1.0, 0.4};
  const KLBasis basis = kl_modes(se, grid, 4);
  const FunctionEnsemble e = kl_field_sample(basis, 1.0, 10, 11);
  const std::vector<double> xi = kl_project(basis, e, MeanFn{});
  for (std::size_t i = 0; i < xi.size(); ++i) {
    CHECK(xi[i] == doctest::Approx(e.latents[i]).epsilon(1e-8));
  }
}

TEST_CASE("ensemble files round-trip bit-exactly and reject corruption") {
  const SensorGrid grid = SensorGrid::product(SensorGrid::line(0.0, 1.0, 4),
                                              SensorGrid::line(-1.0, 1.0, 3));
  FunctionEnsemble e;
  e.grid = grid;
  e.n_samples = 5;
  e.values = testutil::random_vector(5 * grid.size(), 31);
  e.latent_dim = 2;
  e.latents = testutil::random_vector(10, 32);

  const auto dir = std::filesystem::temp_directory_path() / "sdeop_test_ens";
  std::filesystem::create_directories(dir);
  const auto path = dir / "e.ens";
  save_ensemble(e, path);
  const FunctionEnsemble r = load_ensemble(path);
  CHECK(r.values == e.values);
  CHECK(r.latents == e.latents);
  CHECK(r.grid.coords == e.grid.coords);
  CHECK(r.grid.quad_weights == e.grid.quad_weights);
  CHECK(r.grid.dim == 2);

  // Flip a magic byte: the loader must refuse.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
  }
  CHECK_THROWS(load_ensemble(path));

  export_ensemble_csv(e, dir / "e.csv");
  CHECK(std::filesystem::file_size(dir / "e.csv") > 0);
  std::filesystem::remove_all(dir);
}
