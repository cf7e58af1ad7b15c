#include "sdeop/solvers.hpp"

#include <cmath>
#include <stdexcept>

#include "sdeop/linalg.hpp"

namespace sdeop {

std::vector<double> cumtrapz(std::span<const double> y, std::span<const double> x) {
  if (y.size() != x.size() || x.empty()) {
    throw std::invalid_argument("cumtrapz: grids empty or sizes differ");
  }
  std::vector<double> out(y.size(), 0.0);
  for (std::size_t i = 1; i < y.size(); ++i) {
    out[i] = out[i - 1] + 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  }
  return out;
}

std::vector<double> solve_growth_ode(std::span<const double> k, std::span<const double> t) {
  if (k.empty()) throw std::invalid_argument("solve_growth_ode: empty grid");
  std::vector<double> u = cumtrapz(k, t);
  for (double& v : u) v = std::exp(v);
  return u;
}

std::vector<double> solve_poisson_1d(std::span<const double> f, double h) {
  const std::size_t n = f.size();
  if (n == 0) throw std::invalid_argument("solve_poisson_1d: empty grid");
  if (h <= 0) throw std::invalid_argument("solve_poisson_1d: spacing must be positive");
  const double h2 = h * h;
  std::vector<double> lower(n, -1.0 / h2), diag(n, 2.0 / h2), upper(n, -1.0 / h2);
  std::vector<double> rhs(f.begin(), f.end());
  return linalg::tridiag_solve(std::move(lower), std::move(diag), std::move(upper),
                               std::move(rhs));
}

namespace {

// Orthonormal discrete sine basis on m interior points and the matching
// eigenvalues of the 1-D three-point Laplacian.
void sine_basis(std::int64_t m, double h, std::vector<double>& s, std::vector<double>& lambda) {
  const double pi = 3.141592653589793238462643383279502884;
  const double norm = std::sqrt(2.0 / static_cast<double>(m + 1));
  s.resize(static_cast<std::size_t>(m) * m);
  lambda.resize(m);
  for (std::int64_t k = 0; k < m; ++k) {
    lambda[k] = (2.0 - 2.0 * std::cos(static_cast<double>(k + 1) * pi / static_cast<double>(m + 1))) /
                (h * h);
    for (std::int64_t i = 0; i < m; ++i) {
      s[i * m + k] =
          norm * std::sin(static_cast<double>((i + 1) * (k + 1)) * pi / static_cast<double>(m + 1));
    }
  }
}

}  // namespace

Field2D solve_poisson_2d(const Field2D& f, double hx, double hy) {
  const std::int64_t nx = f.nx(), ny = f.ny();
  if (nx == 0 || ny == 0) throw std::invalid_argument("solve_poisson_2d: empty grid");
  if (static_cast<std::int64_t>(f.values.size()) != nx * ny) {
    throw std::invalid_argument("solve_poisson_2d: value count does not match grid");
  }
  if (hx <= 0 || hy <= 0) throw std::invalid_argument("solve_poisson_2d: spacings must be positive");

  std::vector<double> sx, lx, sy, ly;
  sine_basis(nx, hx, sx, lx);
  sine_basis(ny, hy, sy, ly);

  // fhat = Sy * F * Sx (S symmetric orthonormal)
  std::vector<double> tmp(static_cast<std::size_t>(ny) * nx), fhat(tmp.size());
  linalg::matmul(sy.data(), f.values.data(), tmp.data(), ny, ny, nx);
  linalg::matmul(tmp.data(), sx.data(), fhat.data(), ny, nx, nx);

  for (std::int64_t iy = 0; iy < ny; ++iy) {
    for (std::int64_t ix = 0; ix < nx; ++ix) {
      const double denom = lx[ix] + ly[iy];
      if (denom <= 0) throw std::runtime_error("solve_poisson_2d: singular mode");
      fhat[iy * nx + ix] /= denom;
    }
  }

  Field2D u;
  u.xs = f.xs;
  u.ys = f.ys;
  u.values.resize(fhat.size());
  linalg::matmul(sy.data(), fhat.data(), tmp.data(), ny, ny, nx);
  linalg::matmul(tmp.data(), sx.data(), u.values.data(), ny, nx, nx);
  return u;
}

Field2D kdv_solution(std::span<const double> f, std::span<const double> t_grid,
                     std::span<const double> x_grid, std::span<const double> query_times) {
  if (f.size() != t_grid.size() || t_grid.empty()) {
    throw std::invalid_argument("kdv_solution: forcing and time grid sizes differ");
  }
  std::vector<double> w = cumtrapz(f, t_grid);
  std::vector<double> iw = cumtrapz(w, t_grid);

  // Map each query time to its grid node.
  std::vector<std::size_t> idx(query_times.size());
  for (std::size_t q = 0; q < query_times.size(); ++q) {
    bool found = false;
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
      if (std::fabs(t_grid[i] - query_times[q]) <= 1e-12) {
        idx[q] = i;
        found = true;
        break;
      }
    }
    if (!found) {
      throw std::invalid_argument("kdv_solution: query time " + std::to_string(query_times[q]) +
                                  " is not a node of the forcing time grid");
    }
  }

  Field2D out;
  out.xs.assign(x_grid.begin(), x_grid.end());
  out.ys.assign(query_times.begin(), query_times.end());
  out.values.resize(x_grid.size() * query_times.size());
  for (std::size_t q = 0; q < query_times.size(); ++q) {
    const double t = t_grid[idx[q]];
    const double wt = w[idx[q]];
    const double phase = -4.0 * t + 6.0 * iw[idx[q]];
    for (std::size_t i = 0; i < x_grid.size(); ++i) {
      const double c = std::cosh(x_grid[i] + phase);
      out.values[q * x_grid.size() + i] = wt - 2.0 / (c * c);
    }
  }
  return out;
}

}  // namespace sdeop
