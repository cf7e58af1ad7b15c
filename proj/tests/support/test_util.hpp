#pragma once

#include <cstdint>
#include <vector>

#include "sdeop/rng.hpp"

namespace sdeop::testutil {

inline std::vector<double> random_vector(std::int64_t n, std::uint64_t seed, double lo = -1.0,
                                         double hi = 1.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

// RK4 integration of du/dt = k(t) u with k linearly interpolated between the
// grid nodes; independent oracle for the growth-ODE solver.
inline std::vector<double> rk4_growth(const std::vector<double>& k,
                                      const std::vector<double>& t, int substeps = 64) {
  auto k_at = [&](double x) {
    if (x <= t.front()) return k.front();
    if (x >= t.back()) return k.back();
    std::size_t lo = 0, hi = t.size() - 1;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      (t[mid] <= x ? lo : hi) = mid;
    }
    const double w = (x - t[lo]) / (t[hi] - t[lo]);
    return k[lo] + w * (k[hi] - k[lo]);
  };
  std::vector<double> u(t.size());
  u[0] = 1.0;
  double cur = 1.0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double h = (t[i] - t[i - 1]) / substeps;
    double x = t[i - 1];
    for (int s = 0; s < substeps; ++s) {
      const double k1 = k_at(x) * cur;
      const double k2 = k_at(x + 0.5 * h) * (cur + 0.5 * h * k1);
      const double k3 = k_at(x + 0.5 * h) * (cur + 0.5 * h * k2);
      const double k4 = k_at(x + h) * (cur + h * k3);
      cur += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
      x += h;
    }
    u[i] = cur;
  }
  return u;
}

}  // namespace sdeop::testutil
