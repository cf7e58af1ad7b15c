#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "sdeop/harness.hpp"
#include "sdeop/kernels.hpp"
#include "sdeop/rng.hpp"
#include "sdeop/solvers.hpp"

namespace sdeop {

using nlohmann::json;

int harness_threads() {
  if (const char* env = std::getenv("SDEOP_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

namespace {

// Deterministic parallel-for: each trajectory derives its own RNG stream, so
// the result is identical for any worker count.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
  const int workers = std::min<std::int64_t>(harness_threads(), n);
  if (workers <= 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (std::int64_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double lerp_at(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  std::size_t lo = 0, hi = xs.size() - 1;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    (xs[mid] <= x ? lo : hi) = mid;
  }
  const double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + t * (ys[hi] - ys[lo]);
}

FunctionEnsemble empty_on(const SensorGrid& grid, std::int64_t n) {
  FunctionEnsemble e;
  e.grid = grid;
  e.n_samples = n;
  e.values.assign(static_cast<std::size_t>(n) * grid.size(), 0.0);
  return e;
}

// ---- growth ODE: k ~ GP on a fine time grid, u = exp(cumtrapz k) -------------

void gen_growth(const ExperimentConfig& cfg, std::int64_t n, std::uint64_t seed,
                FunctionEnsemble& input, FunctionEnsemble& target) {
  const SensorGrid fine = SensorGrid::line(0.0, 1.0, 401);
  const std::vector<double>& ft = fine.coords;
  input = empty_on(input_grid(cfg), n);
  target = empty_on(output_grid(cfg), n);
  const bool draw_length = cfg.length_range[1] > cfg.length_range[0];

  parallel_for(n, [&](std::int64_t s) {
    KernelSpec k = cfg.kernel;
    if (draw_length) {
      Rng lr(derive_seed(seed, "corr-length", s));
      k.length = lr.uniform(cfg.length_range[0], cfg.length_range[1]);
    }
    const FunctionEnsemble traj = gp_sample(MeanFn{}, k, fine, 1, derive_seed(seed, "traj", s));
    const std::vector<double> kf(traj.values.begin(), traj.values.end());
    const std::vector<double> uf = solve_growth_ode(kf, ft);
    double* in_row = input.sample(s);
    for (std::int64_t j = 0; j < input.grid.size(); ++j) {
      in_row[j] = lerp_at(ft, kf, input.grid.coords[j]);
    }
    double* out_row = target.sample(s);
    for (std::int64_t j = 0; j < target.grid.size(); ++j) {
      out_row[j] = lerp_at(ft, uf, target.grid.coords[j]);
    }
  });
}

// ---- 1-D Poisson (inverse): f ~ GP, solve on a 4x finer interior grid --------

void gen_poisson1d(const ExperimentConfig& cfg, std::int64_t n, std::uint64_t seed,
                   FunctionEnsemble& input, FunctionEnsemble& target) {
  const std::int64_t m = cfg.input_sensors[0];
  const std::int64_t fine_n = 4 * (m + 1) - 1;
  const SensorGrid fine = SensorGrid::interior(-1.0, 1.0, fine_n);
  const double hf = 2.0 / static_cast<double>(4 * (m + 1));

  const FunctionEnsemble f_fine =
      gp_sample(problem_mean(cfg), cfg.kernel, fine, n, derive_seed(seed, "f"));

  input = empty_on(input_grid(cfg), n);   // u observations
  target = empty_on(output_grid(cfg), n);  // f to recover
  parallel_for(n, [&](std::int64_t s) {
    const double* f_row = f_fine.sample(s);
    const std::vector<double> u_fine =
        solve_poisson_1d(std::span<const double>(f_row, fine_n), hf);
    double* in_row = input.sample(s);
    double* out_row = target.sample(s);
    for (std::int64_t j = 0; j < m; ++j) {
      const std::int64_t fj = 4 * j + 3;  // shared node of the nested grids
      in_row[j] = u_fine[fj];
      out_row[j] = f_row[fj];
    }
  });
}

// ---- 2-D Poisson (forward): Kronecker GP sampling + sine-basis solve ---------

void gen_poisson2d(const ExperimentConfig& cfg, std::int64_t n, std::uint64_t seed,
                   FunctionEnsemble& input, FunctionEnsemble& target) {
  const std::int64_t mx = cfg.input_sensors[0], my = cfg.input_sensors[1];
  const std::int64_t fx = 4 * (mx + 1) - 1, fy = 4 * (my + 1) - 1;
  const SensorGrid fine_x = SensorGrid::interior(-1.0, 1.0, fx);
  const SensorGrid fine_y = SensorGrid::interior(-1.0, 1.0, fy);
  const double hx = 2.0 / static_cast<double>(4 * (mx + 1));
  const double hy = 2.0 / static_cast<double>(4 * (my + 1));

  const FunctionEnsemble f_fine = gp_sample_grid2d(problem_mean(cfg), cfg.kernel, fine_x, fine_y,
                                                   n, derive_seed(seed, "f2d"));

  input = empty_on(input_grid(cfg), n);
  target = empty_on(output_grid(cfg), n);
  parallel_for(n, [&](std::int64_t s) {
    Field2D f;
    f.xs = fine_x.coords;
    f.ys = fine_y.coords;
    f.values.assign(f_fine.sample(s), f_fine.sample(s) + fx * fy);
    const Field2D u = solve_poisson_2d(f, hx, hy);
    double* in_row = input.sample(s);
    double* out_row = target.sample(s);
    for (std::int64_t iy = 0; iy < my; ++iy) {
      for (std::int64_t ix = 0; ix < mx; ++ix) {
        const std::int64_t fj = (4 * iy + 3) * fx + (4 * ix + 3);
        in_row[iy * mx + ix] = f.values[fj];
        out_row[iy * mx + ix] = u.values[fj];
      }
    }
  });
}

// ---- KdV: KL forcing in time, analytic solution on the (x,t) grid ------------

void gen_kdv(const ExperimentConfig& cfg, std::int64_t n, std::uint64_t seed,
             FunctionEnsemble& input, FunctionEnsemble& target) {
  const SensorGrid fgrid = forcing_grid(cfg);
  const KLBasis basis = kl_modes(cfg.kernel, fgrid, cfg.kl_dim);
  input = kl_field_sample(basis, cfg.field_sigma, n, derive_seed(seed, "kdv-f"));

  const SensorGrid out = output_grid(cfg);
  const std::int64_t nx = cfg.output_sensors[0], nt = cfg.output_sensors[1];
  std::vector<double> xq(nx), tq(nt);
  for (std::int64_t i = 0; i < nx; ++i) xq[i] = out.coords[2 * i];
  for (std::int64_t j = 0; j < nt; ++j) tq[j] = out.coords[2 * (j * nx) + 1];

  target = empty_on(out, n);
  parallel_for(n, [&](std::int64_t s) {
    const Field2D u = kdv_solution(
        std::span<const double>(input.sample(s), fgrid.size()), fgrid.coords, xq, tq);
    std::copy(u.values.begin(), u.values.end(), target.sample(s));
  });
}

}  // namespace

void sample_problem(const ExperimentConfig& cfg, std::int64_t n, std::uint64_t seed,
                    FunctionEnsemble& input, FunctionEnsemble& target) {
  switch (cfg.problem) {
    case Problem::growth_ode: gen_growth(cfg, n, seed, input, target); return;
    case Problem::poisson1d_inverse: gen_poisson1d(cfg, n, seed, input, target); return;
    case Problem::poisson2d_forward: gen_poisson2d(cfg, n, seed, input, target); return;
    case Problem::kdv_forward: gen_kdv(cfg, n, seed, input, target); return;
  }
  throw std::logic_error("bad problem");
}

DatasetPaths dataset_paths(const std::filesystem::path& data_dir) {
  DatasetPaths p;
  p.dir = data_dir;
  p.train_input = data_dir / "train_input.ens";
  p.train_target = data_dir / "train_target.ens";
  p.test_input = data_dir / "test_input.ens";
  p.test_target = data_dir / "test_target.ens";
  p.manifest = data_dir / "manifest.json";
  return p;
}

void generate_dataset(const ExperimentConfig& cfg, const std::filesystem::path& data_dir) {
  if (cfg.n_train < 1 || cfg.n_test < 1) {
    throw std::invalid_argument("generate_dataset: trajectory counts must be positive");
  }
  // Validate grids before any file is written.
  (void)input_grid(cfg);
  (void)output_grid(cfg);

  FunctionEnsemble tri, tro, tei, teo;
  sample_problem(cfg, cfg.n_train, derive_seed(cfg.seed, "dataset-train"), tri, tro);
  sample_problem(cfg, cfg.n_test, derive_seed(cfg.seed, "dataset-test"), tei, teo);

  std::filesystem::create_directories(data_dir);
  const DatasetPaths p = dataset_paths(data_dir);
  save_ensemble(tri, p.train_input);
  save_ensemble(tro, p.train_target);
  save_ensemble(tei, p.test_input);
  save_ensemble(teo, p.test_target);

  json manifest;
  manifest["kind"] = "dataset";
  manifest["config"] = json::parse(config_to_json_text(cfg));
  manifest["seed"] = cfg.seed;
  manifest["kernels"] = kernels::active().name;
  manifest["files"] = {{"train_input.ens", file_hash_hex(p.train_input)},
                       {"train_target.ens", file_hash_hex(p.train_target)},
                       {"test_input.ens", file_hash_hex(p.test_input)},
                       {"test_target.ens", file_hash_hex(p.test_target)}};
  std::ofstream os(p.manifest);
  if (!os) throw std::runtime_error("cannot write manifest: " + p.manifest.string());
  os << manifest.dump(2) << '\n';
}

Dataset load_dataset(const DatasetPaths& paths) {
  Dataset d;
  d.train_input = load_ensemble(paths.train_input);
  d.train_target = load_ensemble(paths.train_target);
  d.test_input = load_ensemble(paths.test_input);
  d.test_target = load_ensemble(paths.test_target);
  return d;
}

Dataset ensure_dataset(const ExperimentConfig& cfg, const std::filesystem::path& data_dir) {
  const DatasetPaths p = dataset_paths(data_dir);
  if (!std::filesystem::exists(p.train_input) || !std::filesystem::exists(p.manifest)) {
    generate_dataset(cfg, data_dir);
  }
  return load_dataset(p);
}

std::string file_hash_hex(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot hash missing file: " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 14];
  while (is) {
    is.read(buf, sizeof(buf));
    const std::streamsize got = is.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

}  // namespace sdeop
