#include "sdeop/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "sdeop/kernels.hpp"

namespace sdeop::linalg {

SymEigen sym_eigen(std::vector<double> a, int n) {
  if (n <= 0 || static_cast<std::int64_t>(a.size()) != static_cast<std::int64_t>(n) * n) {
    throw std::invalid_argument("sym_eigen: bad dimensions");
  }
  std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * n + i] = 1.0;

  auto off_norm = [&]() {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) s += a[static_cast<std::size_t>(i) * n + j] * a[static_cast<std::size_t>(i) * n + j];
    return s;
  };

  const double scale = std::inner_product(a.begin(), a.end(), a.begin(), 0.0);
  const double tol = 1e-30 * (scale > 0 ? scale : 1.0);
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps && off_norm() > tol; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[static_cast<std::size_t>(p) * n + q];
        if (apq == 0.0) continue;
        const double app = a[static_cast<std::size_t>(p) * n + p];
        const double aqq = a[static_cast<std::size_t>(q) * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int i = 0; i < n; ++i) {
          const double aip = a[static_cast<std::size_t>(i) * n + p];
          const double aiq = a[static_cast<std::size_t>(i) * n + q];
          a[static_cast<std::size_t>(i) * n + p] = c * aip - s * aiq;
          a[static_cast<std::size_t>(i) * n + q] = s * aip + c * aiq;
        }
        for (int j = 0; j < n; ++j) {
          const double apj = a[static_cast<std::size_t>(p) * n + j];
          const double aqj = a[static_cast<std::size_t>(q) * n + j];
          a[static_cast<std::size_t>(p) * n + j] = c * apj - s * aqj;
          a[static_cast<std::size_t>(q) * n + j] = s * apj + c * aqj;
        }
        for (int i = 0; i < n; ++i) {
          const double vip = v[static_cast<std::size_t>(i) * n + p];
          const double viq = v[static_cast<std::size_t>(i) * n + q];
          v[static_cast<std::size_t>(i) * n + p] = c * vip - s * viq;
          v[static_cast<std::size_t>(i) * n + q] = s * vip + c * viq;
        }
      }
    }
  }

  SymEigen out;
  out.n = n;
  out.values.resize(n);
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::vector<double> diag(n);
  for (int i = 0; i < n; ++i) diag[i] = a[static_cast<std::size_t>(i) * n + i];
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return diag[x] > diag[y]; });
  out.vectors.resize(static_cast<std::size_t>(n) * n);
  for (int k = 0; k < n; ++k) {
    out.values[k] = diag[order[k]];
    for (int i = 0; i < n; ++i) {
      out.vectors[static_cast<std::size_t>(i) * n + k] = v[static_cast<std::size_t>(i) * n + order[k]];
    }
  }
  return out;
}

bool cholesky_in_place(std::vector<double>& a, int n) {
  const auto& kt = kernels::active();
  for (int j = 0; j < n; ++j) {
    double* rowj = a.data() + static_cast<std::size_t>(j) * n;
    double d = rowj[j] - kt.dot(rowj, rowj, j);
    if (d <= 0.0 || !std::isfinite(d)) return false;
    d = std::sqrt(d);
    rowj[j] = d;
    const double inv = 1.0 / d;
    for (int i = j + 1; i < n; ++i) {
      double* rowi = a.data() + static_cast<std::size_t>(i) * n;
      rowi[j] = (rowi[j] - kt.dot(rowi, rowj, j)) * inv;
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) a[static_cast<std::size_t>(i) * n + j] = 0.0;
  }
  return true;
}

std::vector<double> tridiag_solve(std::vector<double> lower, std::vector<double> diag,
                                  std::vector<double> upper, std::vector<double> rhs) {
  const std::size_t n = diag.size();
  if (lower.size() != n || upper.size() != n || rhs.size() != n || n == 0) {
    throw std::invalid_argument("tridiag_solve: band sizes disagree");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (diag[i - 1] == 0.0) throw std::runtime_error("tridiag_solve: zero pivot");
    const double w = lower[i] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  std::vector<double> x(n);
  if (diag[n - 1] == 0.0) throw std::runtime_error("tridiag_solve: zero pivot");
  x[n - 1] = rhs[n - 1] / diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) {
    x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
  }
  return x;
}

void matmul(const double* a, const double* b, double* c, std::int64_t n, std::int64_t k,
            std::int64_t m) {
  const auto& kt = kernels::active();
  std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(n) * m);
  for (std::int64_t i = 0; i < n; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * m;
    for (std::int64_t kk = 0; kk < k; ++kk) {
      kt.axpy(arow[kk], b + kk * m, crow, m);
    }
  }
}

}  // namespace sdeop::linalg
