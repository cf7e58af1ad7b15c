#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace sdeop {

// Ordered sensor coordinates. 2D grids are stored y-major with x fastest, so
// a flat row of values reshapes directly to [ny, nx]. quad_weights are the
// trapezoid weights used by the Nystrom discretization.
struct SensorGrid {
  int dim = 1;
  std::vector<double> coords;        // [n, dim] row-major
  std::vector<double> quad_weights;  // [n]; empty for grids without a rule

  std::int64_t size() const {
    return dim > 0 ? static_cast<std::int64_t>(coords.size()) / dim : 0;
  }
  const double* point(std::int64_t i) const { return coords.data() + i * dim; }
  double coord(std::int64_t i, int d) const { return coords[i * dim + d]; }
  std::array<double, 2> bounds(int d) const;

  // n evenly spaced points on [a, b] including both endpoints.
  static SensorGrid line(double a, double b, std::int64_t n);
  // n interior points of (a, b): a + h, ..., b - h with h = (b-a)/(n+1).
  static SensorGrid interior(double a, double b, std::int64_t n);
  // Tensor product of two 1-D grids; rows range over y, x fastest.
  static SensorGrid product(const SensorGrid& xs, const SensorGrid& ys);
};

enum class KernelFamily { squared_exponential, exponential };

KernelFamily kernel_family_from_string(const std::string& s);
const char* to_string(KernelFamily f);

// Stationary covariance kernel: squared-exponential
// sigma^2 exp(-|d|^2 / (2 l^2)) or exponential sigma^2 exp(-|d| / l).
struct KernelSpec {
  KernelFamily family = KernelFamily::squared_exponential;
  double sigma = 1.0;
  double length = 1.0;

  double operator()(const double* x, const double* y, int dim) const;
};

// K[i,j] = kernel(x_i, x_j); exactly symmetric.
std::vector<double> gram_matrix(const KernelSpec& kernel, const SensorGrid& grid);

// Sampled trajectories of a random function on a grid; optional per-sample
// latent coordinates (KL weights).
struct FunctionEnsemble {
  SensorGrid grid;
  std::int64_t n_samples = 0;
  std::vector<double> values;  // [n_samples, grid.size()]
  std::int64_t latent_dim = 0;
  std::vector<double> latents;  // [n_samples, latent_dim]

  const double* sample(std::int64_t i) const { return values.data() + i * grid.size(); }
  double* sample(std::int64_t i) { return values.data() + i * grid.size(); }
};

using MeanFn = std::function<double(const double*)>;

// Exact GP draw: mean + L eta with L the Cholesky factor of gram + jitter*I.
// Jitter escalates 1e-12 -> 1e-6; failure beyond that raises with a
// conditioning report. Deterministic per seed.
FunctionEnsemble gp_sample(const MeanFn& mean, const KernelSpec& kernel, const SensorGrid& grid,
                           std::int64_t n_samples, std::uint64_t seed);

// Exact GP draw on a tensor grid for the (separable) squared-exponential
// kernel via per-axis Cholesky factors; avoids the dense Gram of the full
// grid. Grid is product(xs, ys).
FunctionEnsemble gp_sample_grid2d(const MeanFn& mean, const KernelSpec& kernel,
                                  const SensorGrid& xs, const SensorGrid& ys,
                                  std::int64_t n_samples, std::uint64_t seed);

// Truncated Karhunen-Loeve basis from the Nystrom discretization of the
// covariance operator under the grid's trapezoid weights.
struct KLBasis {
  SensorGrid grid;
  std::int64_t retained = 0;
  std::vector<double> eigenvalues;     // descending, length `retained`
  std::vector<double> eigenfunctions;  // [grid.size(), retained], column k = e_k

  double eigenfunction(std::int64_t point, std::int64_t mode) const {
    return eigenfunctions[point * retained + mode];
  }
};

KLBasis kl_modes(const KernelSpec& kernel, const SensorGrid& grid, std::int64_t retain);

// f_s(x_j) = sigma * sum_i sqrt(lambda_i) e_i(x_j) w_si with iid standard
// normal w; the w rows are stored as the ensemble latents.
FunctionEnsemble kl_field_sample(const KLBasis& basis, double sigma, std::int64_t n_samples,
                                 std::uint64_t seed);

// Quadrature projection of samples onto the basis: xi_i = <f - mean, e_i> / sqrt(lambda_i).
// Returns [n_samples, retained] row-major.
std::vector<double> kl_project(const KLBasis& basis, const FunctionEnsemble& ensemble,
                               const MeanFn& mean);

// Columnar binary ensemble file (magic, version, shapes, raw doubles) and a
// CSV export for inspection.
void save_ensemble(const FunctionEnsemble& e, const std::filesystem::path& path);
FunctionEnsemble load_ensemble(const std::filesystem::path& path);
void export_ensemble_csv(const FunctionEnsemble& e, const std::filesystem::path& path);

}  // namespace sdeop
