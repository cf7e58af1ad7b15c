#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sdeop {

// Values on a tensor grid, y-major with x fastest: values[iy * nx + ix].
struct Field2D {
  std::vector<double> xs, ys;
  std::vector<double> values;

  std::int64_t nx() const { return static_cast<std::int64_t>(xs.size()); }
  std::int64_t ny() const { return static_cast<std::int64_t>(ys.size()); }
  double& at(std::int64_t ix, std::int64_t iy) { return values[iy * nx() + ix]; }
  double at(std::int64_t ix, std::int64_t iy) const { return values[iy * nx() + ix]; }
};

// Cumulative trapezoid of y over grid x, anchored at 0 at the first node.
std::vector<double> cumtrapz(std::span<const double> y, std::span<const double> x);

// du/dt = k(t) u, u(t0) = 1, via u = exp(cumtrapz of k). The grid must
// include the initial time as its first node.
std::vector<double> solve_growth_ode(std::span<const double> k, std::span<const double> t);

// -u'' = f on a uniform interior grid with spacing h and homogeneous
// Dirichlet ends; second-order central differences.
std::vector<double> solve_poisson_1d(std::span<const double> f, double h);

// -(u_xx + u_yy) = f on the interior tensor grid of a rectangle, zero
// boundary; direct solve by diagonalizing the 1-D operators in the discrete
// sine basis. hx/hy are the grid spacings (boundary offset included).
Field2D solve_poisson_2d(const Field2D& f, double hx, double hy);

// Analytic KdV solution with time-dependent additive forcing:
//   u(x,t) = W(t) - 2 sech^2(x - 4t + 6 I(t)),  W = int_0^t f,  I = int_0^t W.
// Query times must coincide with nodes of the forcing time grid.
Field2D kdv_solution(std::span<const double> f, std::span<const double> t_grid,
                     std::span<const double> x_grid, std::span<const double> query_times);

}  // namespace sdeop
