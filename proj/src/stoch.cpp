#include "sdeop/stoch.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "sdeop/kernels.hpp"
#include "sdeop/linalg.hpp"
#include "sdeop/rng.hpp"

namespace sdeop {

std::array<double, 2> SensorGrid::bounds(int d) const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::int64_t i = 0; i < size(); ++i) {
    lo = std::min(lo, coord(i, d));
    hi = std::max(hi, coord(i, d));
  }
  return {lo, hi};
}

SensorGrid SensorGrid::line(double a, double b, std::int64_t n) {
  if (n < 1) throw std::invalid_argument("SensorGrid::line: need n >= 1");
  SensorGrid g;
  g.dim = 1;
  g.coords.resize(n);
  g.quad_weights.assign(n, 0.0);
  if (n == 1) {
    g.coords[0] = a;
    g.quad_weights[0] = b - a;
    return g;
  }
  const double h = (b - a) / static_cast<double>(n - 1);
  for (std::int64_t i = 0; i < n; ++i) {
    g.coords[i] = a + h * static_cast<double>(i);
    g.quad_weights[i] = (i == 0 || i == n - 1) ? 0.5 * h : h;
  }
  return g;
}

SensorGrid SensorGrid::interior(double a, double b, std::int64_t n) {
  if (n < 1) throw std::invalid_argument("SensorGrid::interior: need n >= 1");
  SensorGrid g;
  g.dim = 1;
  const double h = (b - a) / static_cast<double>(n + 1);
  g.coords.resize(n);
  g.quad_weights.assign(n, h);
  for (std::int64_t i = 0; i < n; ++i) g.coords[i] = a + h * static_cast<double>(i + 1);
  return g;
}

SensorGrid SensorGrid::product(const SensorGrid& xs, const SensorGrid& ys) {
  if (xs.dim != 1 || ys.dim != 1) throw std::invalid_argument("SensorGrid::product needs 1-D factors");
  SensorGrid g;
  g.dim = 2;
  const std::int64_t nx = xs.size(), ny = ys.size();
  g.coords.resize(2 * nx * ny);
  const bool weighted = !xs.quad_weights.empty() && !ys.quad_weights.empty();
  if (weighted) g.quad_weights.resize(nx * ny);
  for (std::int64_t iy = 0; iy < ny; ++iy) {
    for (std::int64_t ix = 0; ix < nx; ++ix) {
      const std::int64_t j = iy * nx + ix;
      g.coords[2 * j] = xs.coords[ix];
      g.coords[2 * j + 1] = ys.coords[iy];
      if (weighted) g.quad_weights[j] = xs.quad_weights[ix] * ys.quad_weights[iy];
    }
  }
  return g;
}

KernelFamily kernel_family_from_string(const std::string& s) {
  if (s == "squared-exponential" || s == "se") return KernelFamily::squared_exponential;
  if (s == "exponential" || s == "exp") return KernelFamily::exponential;
  throw std::invalid_argument("unknown kernel family '" + s + "'");
}

const char* to_string(KernelFamily f) {
  return f == KernelFamily::squared_exponential ? "squared-exponential" : "exponential";
}

double KernelSpec::operator()(const double* x, const double* y, int dim) const {
  double d2 = 0.0;
  for (int d = 0; d < dim; ++d) {
    const double diff = x[d] - y[d];
    d2 += diff * diff;
  }
  switch (family) {
    case KernelFamily::squared_exponential:
      return sigma * sigma * std::exp(-d2 / (2.0 * length * length));
    case KernelFamily::exponential:
      return sigma * sigma * std::exp(-std::sqrt(d2) / length);
  }
  return 0.0;
}

std::vector<double> gram_matrix(const KernelSpec& kernel, const SensorGrid& grid) {
  const std::int64_t n = grid.size();
  if (n == 0) throw std::invalid_argument("gram_matrix: empty grid");
  if (kernel.sigma < 0 || kernel.length <= 0) {
    throw std::invalid_argument("gram_matrix: need sigma >= 0 and length > 0");
  }
  std::vector<double> k(static_cast<std::size_t>(n) * n);
  for (std::int64_t i = 0; i < n; ++i) {
    k[i * n + i] = kernel(grid.point(i), grid.point(i), grid.dim);
    for (std::int64_t j = i + 1; j < n; ++j) {
      const double v = kernel(grid.point(i), grid.point(j), grid.dim);
      k[i * n + j] = v;
      k[j * n + i] = v;
    }
  }
  return k;
}

namespace {

// Lower Cholesky of gram + jitter*I with escalation. Returns the factor; a
// zero matrix short-circuits to L = 0 (the sigma = 0 case).
std::vector<double> jittered_cholesky(std::vector<double> gram, std::int64_t n,
                                      const char* context) {
  double max_diag = 0.0;
  for (std::int64_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::fabs(gram[i * n + i]));
  if (max_diag == 0.0) return std::vector<double>(static_cast<std::size_t>(n) * n, 0.0);

  static constexpr double kJitters[] = {0.0, 1e-12, 1e-10, 1e-8, 1e-6};
  for (const double jitter : kJitters) {
    std::vector<double> a = gram;
    if (jitter > 0) {
      for (std::int64_t i = 0; i < n; ++i) a[i * n + i] += jitter;
    }
    if (linalg::cholesky_in_place(a, static_cast<int>(n))) return a;
  }
  throw std::runtime_error(std::string(context) +
                           ": Cholesky failed up to jitter 1e-6; matrix is numerically "
                           "indefinite (max diagonal " +
                           std::to_string(max_diag) + ")");
}

}  // namespace

FunctionEnsemble gp_sample(const MeanFn& mean, const KernelSpec& kernel, const SensorGrid& grid,
                           std::int64_t n_samples, std::uint64_t seed) {
  const std::int64_t n = grid.size();
  if (n_samples < 1) throw std::invalid_argument("gp_sample: need n_samples >= 1");
  std::vector<double> chol = jittered_cholesky(gram_matrix(kernel, grid), n, "gp_sample");

  std::vector<double> mu(n, 0.0);
  if (mean) {
    for (std::int64_t i = 0; i < n; ++i) mu[i] = mean(grid.point(i));
  }

  FunctionEnsemble out;
  out.grid = grid;
  out.n_samples = n_samples;
  out.values.resize(static_cast<std::size_t>(n_samples) * n);
  Rng rng(derive_seed(seed, "gp_sample"));
  std::vector<double> eta(n);
  const auto& kt = kernels::active();
  for (std::int64_t s = 0; s < n_samples; ++s) {
    for (std::int64_t i = 0; i < n; ++i) eta[i] = rng.gaussian();
    double* row = out.sample(s);
    for (std::int64_t i = 0; i < n; ++i) {
      row[i] = mu[i] + kt.dot(chol.data() + i * n, eta.data(), i + 1);
    }
  }
  return out;
}

FunctionEnsemble gp_sample_grid2d(const MeanFn& mean, const KernelSpec& kernel,
                                  const SensorGrid& xs, const SensorGrid& ys,
                                  std::int64_t n_samples, std::uint64_t seed) {
  if (kernel.family != KernelFamily::squared_exponential) {
    throw std::invalid_argument("gp_sample_grid2d: only the squared-exponential kernel separates");
  }
  if (n_samples < 1) throw std::invalid_argument("gp_sample_grid2d: need n_samples >= 1");
  const std::int64_t nx = xs.size(), ny = ys.size();

  // Unit-amplitude per-axis factors; the overall sigma scales the field.
  KernelSpec axis = kernel;
  axis.sigma = 1.0;
  std::vector<double> lx = jittered_cholesky(gram_matrix(axis, xs), nx, "gp_sample_grid2d");
  std::vector<double> ly = jittered_cholesky(gram_matrix(axis, ys), ny, "gp_sample_grid2d");

  FunctionEnsemble out;
  out.grid = SensorGrid::product(xs, ys);
  out.n_samples = n_samples;
  out.values.resize(static_cast<std::size_t>(n_samples) * nx * ny);

  std::vector<double> mu(nx * ny, 0.0);
  if (mean) {
    for (std::int64_t j = 0; j < nx * ny; ++j) mu[j] = mean(out.grid.point(j));
  }

  Rng rng(derive_seed(seed, "gp_sample_grid2d"));
  std::vector<double> h(static_cast<std::size_t>(ny) * nx), t(static_cast<std::size_t>(ny) * nx);
  const auto& kt = kernels::active();
  for (std::int64_t s = 0; s < n_samples; ++s) {
    for (double& v : h) v = rng.gaussian();
    // t = H * Lx^T, i.e. t[iy,ix] = dot(H[iy, 0..ix], Lx[ix, 0..ix])
    for (std::int64_t iy = 0; iy < ny; ++iy) {
      for (std::int64_t ix = 0; ix < nx; ++ix) {
        t[iy * nx + ix] = kt.dot(h.data() + iy * nx, lx.data() + ix * nx, ix + 1);
      }
    }
    // field = Ly * t (per column), scaled by sigma, plus mean
    double* row = out.sample(s);
    for (std::int64_t iy = 0; iy < ny; ++iy) {
      for (std::int64_t ix = 0; ix < nx; ++ix) {
        double acc = 0.0;
        for (std::int64_t k = 0; k <= iy; ++k) acc += ly[iy * ny + k] * t[k * nx + ix];
        row[iy * nx + ix] = mu[iy * nx + ix] + kernel.sigma * acc;
      }
    }
  }
  return out;
}

KLBasis kl_modes(const KernelSpec& kernel, const SensorGrid& grid, std::int64_t retain) {
  const std::int64_t n = grid.size();
  if (retain < 1 || retain > n) {
    throw std::invalid_argument("kl_modes: retain must be in [1, " + std::to_string(n) +
                                "], got " + std::to_string(retain));
  }
  if (grid.quad_weights.empty()) {
    throw std::invalid_argument("kl_modes: grid carries no quadrature weights");
  }

  // Nystrom: eigendecompose W^{1/2} K W^{1/2}, then e = W^{-1/2} v.
  std::vector<double> b = gram_matrix(kernel, grid);
  std::vector<double> sqw(n);
  for (std::int64_t i = 0; i < n; ++i) sqw[i] = std::sqrt(grid.quad_weights[i]);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) b[i * n + j] *= sqw[i] * sqw[j];
  }
  linalg::SymEigen eig = linalg::sym_eigen(std::move(b), static_cast<int>(n));

  KLBasis basis;
  basis.grid = grid;
  basis.retained = retain;
  basis.eigenvalues.resize(retain);
  basis.eigenfunctions.resize(static_cast<std::size_t>(n) * retain);
  for (std::int64_t k = 0; k < retain; ++k) {
    basis.eigenvalues[k] = std::max(eig.values[k], 0.0);
    // Sign convention: first entry of visible magnitude is positive.
    double sign = 1.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const double v = eig.vectors[i * n + k];
      if (std::fabs(v) > 1e-12) {
        sign = v > 0 ? 1.0 : -1.0;
        break;
      }
    }
    for (std::int64_t i = 0; i < n; ++i) {
      basis.eigenfunctions[i * retain + k] = sign * eig.vectors[i * n + k] / sqw[i];
    }
  }
  return basis;
}

FunctionEnsemble kl_field_sample(const KLBasis& basis, double sigma, std::int64_t n_samples,
                                 std::uint64_t seed) {
  if (n_samples < 0) throw std::invalid_argument("kl_field_sample: negative sample count");
  const std::int64_t n = basis.grid.size();
  const std::int64_t d = basis.retained;
  FunctionEnsemble out;
  out.grid = basis.grid;
  out.n_samples = n_samples;
  out.values.assign(static_cast<std::size_t>(n_samples) * n, 0.0);
  out.latent_dim = d;
  out.latents.resize(static_cast<std::size_t>(n_samples) * d);

  std::vector<double> sqrt_l(d);
  for (std::int64_t k = 0; k < d; ++k) sqrt_l[k] = std::sqrt(basis.eigenvalues[k]);

  Rng rng(derive_seed(seed, "kl_field_sample"));
  for (std::int64_t s = 0; s < n_samples; ++s) {
    double* w = out.latents.data() + s * d;
    for (std::int64_t k = 0; k < d; ++k) w[k] = rng.gaussian();
    double* row = out.sample(s);
    for (std::int64_t j = 0; j < n; ++j) {
      double acc = 0.0;
      const double* ef = basis.eigenfunctions.data() + j * d;
      for (std::int64_t k = 0; k < d; ++k) acc += sqrt_l[k] * ef[k] * w[k];
      row[j] = sigma * acc;
    }
  }
  return out;
}

std::vector<double> kl_project(const KLBasis& basis, const FunctionEnsemble& ensemble,
                               const MeanFn& mean) {
  const std::int64_t n = basis.grid.size();
  if (ensemble.grid.size() != n) {
    throw std::invalid_argument("kl_project: ensemble grid does not match basis grid");
  }
  const std::int64_t d = basis.retained;
  std::vector<double> mu(n, 0.0);
  if (mean) {
    for (std::int64_t j = 0; j < n; ++j) mu[j] = mean(basis.grid.point(j));
  }
  std::vector<double> xi(static_cast<std::size_t>(ensemble.n_samples) * d);
  for (std::int64_t s = 0; s < ensemble.n_samples; ++s) {
    const double* row = ensemble.sample(s);
    for (std::int64_t k = 0; k < d; ++k) {
      double acc = 0.0;
      for (std::int64_t j = 0; j < n; ++j) {
        acc += basis.grid.quad_weights[j] * (row[j] - mu[j]) * basis.eigenfunction(j, k);
      }
      const double denom = std::sqrt(std::max(basis.eigenvalues[k], 1e-300));
      xi[s * d + k] = acc / denom;
    }
  }
  return xi;
}

// ---- serialization ----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'S', 'D', 'E', 'N'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
}

void write_doubles(std::ofstream& os, const std::vector<double>& v) {
  write_pod(os, static_cast<std::int64_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_doubles(std::ifstream& is) {
  std::int64_t n = 0;
  read_pod(is, n);
  if (n < 0) throw std::runtime_error("ensemble file: negative array length");
  std::vector<double> v(static_cast<std::size_t>(n));
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  return v;
}

}  // namespace

void save_ensemble(const FunctionEnsemble& e, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  os.write(kMagic, 4);
  write_pod(os, kVersion);
  write_pod(os, e.n_samples);
  write_pod(os, static_cast<std::int64_t>(e.grid.size()));
  write_pod(os, static_cast<std::int32_t>(e.grid.dim));
  write_pod(os, e.latent_dim);
  write_doubles(os, e.grid.coords);
  write_doubles(os, e.grid.quad_weights);
  write_doubles(os, e.values);
  write_doubles(os, e.latents);
  if (!os) throw std::runtime_error("short write: " + path.string());
}

FunctionEnsemble load_ensemble(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not an ensemble file (bad magic): " + path.string());
  }
  std::uint32_t version = 0;
  read_pod(is, version);
  if (version != kVersion) {
    throw std::runtime_error("unsupported ensemble version " + std::to_string(version) + ": " +
                             path.string());
  }
  FunctionEnsemble e;
  std::int64_t n_sensors = 0;
  std::int32_t dim = 0;
  read_pod(is, e.n_samples);
  read_pod(is, n_sensors);
  read_pod(is, dim);
  read_pod(is, e.latent_dim);
  e.grid.dim = dim;
  e.grid.coords = read_doubles(is);
  e.grid.quad_weights = read_doubles(is);
  e.values = read_doubles(is);
  e.latents = read_doubles(is);
  if (!is) throw std::runtime_error("truncated ensemble file: " + path.string());
  if (e.grid.size() != n_sensors ||
      static_cast<std::int64_t>(e.values.size()) != e.n_samples * n_sensors ||
      static_cast<std::int64_t>(e.latents.size()) != e.n_samples * e.latent_dim) {
    throw std::runtime_error("inconsistent ensemble file: " + path.string());
  }
  return e;
}

void export_ensemble_csv(const FunctionEnsemble& e, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  os << "sample";
  for (std::int64_t j = 0; j < e.grid.size(); ++j) {
    os << ",s" << j;
  }
  os << '\n';
  char buf[32];
  for (std::int64_t s = 0; s < e.n_samples; ++s) {
    os << s;
    const double* row = e.sample(s);
    for (std::int64_t j = 0; j < e.grid.size(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[j]);
      os << ',' << buf;
    }
    os << '\n';
  }
}

}  // namespace sdeop
