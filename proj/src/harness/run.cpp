#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "sdeop/baselines.hpp"
#include "sdeop/harness.hpp"
#include "sdeop/kernels.hpp"
#include "sdeop/rng.hpp"
#include "sdeop/uq.hpp"

namespace sdeop {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Encoder-shaped tensor view of an ensemble: [N,1,L] or [N,1,ny,nx].
Tensor encoder_inputs(const ExperimentConfig& cfg, const FunctionEnsemble& e) {
  if (cfg.problem == Problem::poisson2d_forward) {
    const std::int64_t nx = cfg.input_sensors[0], ny = cfg.input_sensors[1];
    return Tensor({e.n_samples, 1, ny, nx}, e.values);
  }
  return Tensor({e.n_samples, 1, e.grid.size()}, e.values);
}

Tensor grid_coords(const SensorGrid& g) {
  return Tensor({g.size(), static_cast<std::int64_t>(g.dim)}, g.coords);
}

MultiAutoSpec build_spec(const ExperimentConfig& cfg, const Dataset& data, ModelKind kind) {
  MultiAutoSpec s;
  s.encoder.input_rank = cfg.problem == Problem::poisson2d_forward ? 2 : 1;
  if (s.encoder.input_rank == 2) {
    s.encoder.input_extent = {cfg.input_sensors[1], cfg.input_sensors[0]};  // [ny, nx]
  } else {
    s.encoder.input_extent = {data.train_input.grid.size()};
  }
  s.encoder.conv_channels = cfg.arch.conv_channels;
  s.encoder.filter = cfg.arch.filter;
  s.encoder.stride = cfg.arch.stride;
  s.encoder.dense_hidden = cfg.arch.dense_hidden;
  s.latent = cfg.arch.latent;
  s.p = cfg.arch.p;
  s.branch_hidden = cfg.arch.branch_hidden;
  s.trunk_hidden = cfg.arch.trunk_hidden;
  s.trunk_unsup_dim = data.train_input.grid.dim;
  s.trunk_sup_dim = data.train_target.grid.dim;
  s.seed = derive_seed(cfg.seed, std::string("model-") + to_string(kind));

  if (cfg.arch.standardize_inputs) {
    double mean = 0.0;
    for (const double v : data.train_input.values) mean += v;
    mean /= static_cast<double>(data.train_input.values.size());
    double var = 0.0;
    for (const double v : data.train_input.values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(data.train_input.values.size());
    s.input_shift = mean;
    s.input_scale = var > 0 ? std::sqrt(var) : 1.0;
  }
  for (int d = 0; d < data.train_input.grid.dim; ++d) {
    const auto b = data.train_input.grid.bounds(d);
    s.unsup_lo.push_back(b[0]);
    s.unsup_hi.push_back(b[1]);
  }
  for (int d = 0; d < data.train_target.grid.dim; ++d) {
    const auto b = data.train_target.grid.bounds(d);
    s.sup_lo.push_back(b[0]);
    s.sup_hi.push_back(b[1]);
  }
  return s;
}

TrainData build_train_data(const ExperimentConfig& cfg, const Dataset& data) {
  TrainData td;
  td.inputs = encoder_inputs(cfg, data.train_input);
  td.targets_k = Tensor({data.train_input.n_samples, data.train_input.grid.size()},
                        data.train_input.values);
  td.targets_u = Tensor({data.train_target.n_samples, data.train_target.grid.size()},
                        data.train_target.values);
  td.unsup_coords = grid_coords(data.train_input.grid);
  td.sup_coords = grid_coords(data.train_target.grid);
  return td;
}

struct EvalMetrics {
  double test_mse, avg_rel_l2, mean_err, var_err;
};

EvalMetrics eval_predictions(const Tensor& pred, const FunctionEnsemble& ref) {
  const std::int64_t n = ref.n_samples, m = ref.grid.size();
  EvalMetrics e{};
  e.test_mse = kernels::active().sq_diff_sum(pred.data(), ref.values.data(), n * m) /
               static_cast<double>(n * m);
  e.avg_rel_l2 = avg_rel_l2(pred.values(), ref.values, n, m);
  const EnsembleStats ps = ensemble_stats(pred.values(), n, m);
  const EnsembleStats rs = ensemble_stats(ref.values, n, m);
  e.mean_err = rel_l2(ps.mean, rs.mean);
  e.var_err = rel_l2(ps.variance, rs.variance);
  return e;
}

void append_eval_rows(std::vector<MetricRow>& rows, const std::string& model,
                      const EvalMetrics& e) {
  rows.push_back({model, "test_mse", e.test_mse});
  rows.push_back({model, "avg_rel_l2", e.avg_rel_l2});
  rows.push_back({model, "mean_err", e.mean_err});
  rows.push_back({model, "var_err", e.var_err});
}

void write_stats_csv(const std::filesystem::path& path, const SensorGrid& grid,
                     const EnsembleStats& ref, const EnsembleStats& pred) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "index";
  for (int d = 0; d < grid.dim; ++d) os << ",coord" << d;
  os << ",ref_mean,pred_mean,ref_var,pred_var\n";
  for (std::int64_t j = 0; j < grid.size(); ++j) {
    os << j;
    for (int d = 0; d < grid.dim; ++d) os << ',' << fmt(grid.coord(j, d));
    os << ',' << fmt(ref.mean[j]) << ',' << fmt(pred.mean[j]) << ',' << fmt(ref.variance[j])
       << ',' << fmt(pred.variance[j]) << '\n';
  }
}

std::vector<std::int64_t> representative_indices(std::int64_t n, std::int64_t want) {
  std::vector<std::int64_t> idx;
  const std::int64_t k = std::min(n, want);
  for (std::int64_t i = 0; i < k; ++i) {
    idx.push_back(k == 1 ? 0 : i * (n - 1) / (k - 1));
  }
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

// Coefficient dump at representative sensors/samples plus the pooled
// near-zero fractions used by the sparsity metrics and stem plots.
struct SparsityReport {
  double frac_a, frac_b, frac_phi;
};

SparsityReport write_coefficients(const std::filesystem::path& path, const MultiAutoModel& model,
                                  const ExperimentConfig& cfg, const Dataset& data) {
  const Tensor a = trunk_unsup_coeffs(model, grid_coords(data.train_input.grid));
  const Tensor b = trunk_sup_coeffs(model, grid_coords(data.train_target.grid));
  const Tensor z = encode_batch(model, encoder_inputs(cfg, data.test_input));
  const Tensor phi = branch_basis(model, z);

  const auto ia = representative_indices(a.extent(0), 5);
  const auto ib = representative_indices(b.extent(0), 5);
  const auto ip = representative_indices(phi.extent(0), 5);

  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "head,row,component,value\n";
  auto dump = [&](const char* head, const Tensor& t, const std::vector<std::int64_t>& rows,
                  std::int64_t& near_zero, std::int64_t& total) {
    const std::int64_t p = t.extent(1);
    for (const std::int64_t r : rows) {
      for (std::int64_t c = 0; c < p; ++c) {
        const double v = t[r * p + c];
        os << head << ',' << r << ',' << c << ',' << fmt(v) << '\n';
        if (std::fabs(v) < 1e-3) ++near_zero;
        ++total;
      }
    }
  };
  std::int64_t za = 0, ta = 0, zb = 0, tb = 0, zp = 0, tp = 0;
  dump("a", a, ia, za, ta);
  dump("b", b, ib, zb, tb);
  dump("phi", phi, ip, zp, tp);
  return {static_cast<double>(za) / static_cast<double>(ta),
          static_cast<double>(zb) / static_cast<double>(tb),
          static_cast<double>(zp) / static_cast<double>(tp)};
}

// ---- per-model training/evaluation -------------------------------------------

struct ModelOutcome {
  std::vector<MetricRow> rows;
  TrainHistory history;
};

ModelOutcome run_multiauto(const ExperimentConfig& cfg, const Dataset& data,
                           const std::filesystem::path& dir) {
  MultiAutoModel model = make_multiauto(build_spec(cfg, data, ModelKind::multiauto));
  const TrainData td = build_train_data(cfg, data);
  ModelOutcome out;
  out.history = train(model, td, to_train_config(cfg));
  save_model(model, dir / "model_multiauto.bin");
  export_history_csv(out.history, dir / "history_multiauto.csv");

  const Tensor test_inputs = encoder_inputs(cfg, data.test_input);
  const Tensor pred = predict_batch(model, test_inputs, grid_coords(data.test_target.grid));
  const EvalMetrics em = eval_predictions(pred, data.test_target);
  append_eval_rows(out.rows, "multiauto", em);

  const Tensor recon = reconstruct_batch(model, test_inputs, grid_coords(data.test_input.grid));
  out.rows.push_back({"multiauto", "recon_mse",
                      kernels::active().sq_diff_sum(recon.data(), data.test_input.values.data(),
                                                    recon.size()) /
                          static_cast<double>(recon.size())});

  const EnsembleStats ps = ensemble_stats(pred.values(), data.test_target.n_samples,
                                          data.test_target.grid.size());
  const EnsembleStats rs = ensemble_stats(data.test_target.values, data.test_target.n_samples,
                                          data.test_target.grid.size());
  write_stats_csv(dir / "stats_multiauto.csv", data.test_target.grid, rs, ps);

  const SparsityReport sp = write_coefficients(dir / "coefficients.csv", model, cfg, data);
  out.rows.push_back({"multiauto", "sparsity_a", sp.frac_a});
  out.rows.push_back({"multiauto", "sparsity_b", sp.frac_b});
  out.rows.push_back({"multiauto", "sparsity_phi", sp.frac_phi});

  // KDE latent generator, evaluated against a fresh Monte-Carlo reference.
  if (cfg.generator.samples > 0 && cfg.problem == Problem::growth_ode) {
    const Tensor ztrain = encode_batch(model, encoder_inputs(cfg, data.train_input));
    const KDEModel kde =
        kde_fit(ztrain.values(), data.train_input.n_samples, model.spec.latent);
    auto [gen_k, gen_u] = generate_ensemble(model, kde, data.train_input.grid,
                                            data.train_target.grid, cfg.generator.samples,
                                            derive_seed(cfg.seed, "generator"));
    FunctionEnsemble ref_in, ref_out;
    sample_problem(cfg, cfg.generator.reference, derive_seed(cfg.seed, "mc-reference"), ref_in,
                   ref_out);
    const EnsembleStats gs =
        ensemble_stats(gen_u.values, gen_u.n_samples, gen_u.grid.size());
    const EnsembleStats ms =
        ensemble_stats(ref_out.values, ref_out.n_samples, ref_out.grid.size());
    out.rows.push_back({"multiauto", "gen_mean_err", rel_l2(gs.mean, ms.mean)});
    out.rows.push_back({"multiauto", "gen_var_err", rel_l2(gs.variance, ms.variance)});
    write_stats_csv(dir / "gen_stats.csv", gen_u.grid, ms, gs);
    save_ensemble(gen_u, dir / "generated_u.ens");
    save_ensemble(gen_k, dir / "generated_k.ens");
  }
  return out;
}

ModelOutcome run_pca(const ExperimentConfig& cfg, const Dataset& data,
                     const std::filesystem::path& dir) {
  const std::int64_t r =
      std::min<std::int64_t>(cfg.arch.latent,
                             std::min(data.train_input.n_samples, data.train_input.grid.size()));
  const PCAProjection proj = pca_fit(data.train_input, r);

  DeepONetModel don = make_deeponet(r, data.train_target.grid.dim, cfg.arch.branch_hidden,
                                    cfg.arch.trunk_hidden, cfg.arch.p,
                                    derive_seed(cfg.seed, "model-pca"));
  for (int d = 0; d < data.train_target.grid.dim; ++d) {
    const auto b = data.train_target.grid.bounds(d);
    don.trunk_lo.push_back(b[0]);
    don.trunk_hi.push_back(b[1]);
  }

  const std::vector<double> ctrain =
      pca_project(proj, data.train_input.values.data(), data.train_input.n_samples);
  const Tensor branch_rows({data.train_input.n_samples, r}, ctrain);
  const Tensor targets({data.train_target.n_samples, data.train_target.grid.size()},
                       data.train_target.values);

  TrainConfig tc = to_train_config(cfg);
  tc.l1_weight = 0.0;  // baselines train on the plain MSE objective
  ModelOutcome out;
  out.history = train_deeponet_factored(don, branch_rows, grid_coords(data.train_target.grid),
                                        targets, tc);
  export_history_csv(out.history, dir / "history_pca.csv");

  const std::vector<double> ctest =
      pca_project(proj, data.test_input.values.data(), data.test_input.n_samples);
  const Tensor pred = deeponet_predict_factored(
      don, Tensor({data.test_input.n_samples, r}, ctest), grid_coords(data.test_target.grid));
  const EvalMetrics em = eval_predictions(pred, data.test_target);
  append_eval_rows(out.rows, "pca", em);

  const EnsembleStats ps =
      ensemble_stats(pred.values(), data.test_target.n_samples, data.test_target.grid.size());
  const EnsembleStats rs = ensemble_stats(data.test_target.values, data.test_target.n_samples,
                                          data.test_target.grid.size());
  write_stats_csv(dir / "stats_pca.csv", data.test_target.grid, rs, ps);
  return out;
}

ModelOutcome run_deeponet(const ExperimentConfig& cfg, const Dataset& data,
                          const std::filesystem::path& dir) {
  if (data.train_input.grid.dim != 1) {
    throw std::invalid_argument("the KL DeepONet baseline expects 1-D input sensors");
  }
  const std::int64_t nkl = cfg.baselines.deeponet_kl_modes;
  KernelSpec ref_kernel = cfg.kernel;
  if (cfg.length_range[1] > cfg.length_range[0]) {
    ref_kernel.length = 0.5 * (cfg.length_range[0] + cfg.length_range[1]);
  }
  const KLBasis basis = kl_modes(ref_kernel, data.train_input.grid, nkl);

  // Fixed branch input: the scaled KL data sqrt(lambda_i) e_i at the sensors.
  const std::int64_t m1 = data.train_input.grid.size();
  std::vector<double> kl_data(static_cast<std::size_t>(nkl) * m1);
  for (std::int64_t i = 0; i < nkl; ++i) {
    const double sq = std::sqrt(basis.eigenvalues[i]);
    for (std::int64_t j = 0; j < m1; ++j) kl_data[i * m1 + j] = sq * basis.eigenfunction(j, i);
  }
  const Tensor branch_fixed({1, nkl * m1}, kl_data);

  auto trunk_rows = [&](const FunctionEnsemble& inputs, const SensorGrid& out_grid) {
    const std::vector<double> xi = kl_project(basis, inputs, MeanFn{});
    const std::int64_t n = inputs.n_samples, m2 = out_grid.size();
    Tensor rows({n * m2, 1 + nkl});
    for (std::int64_t s = 0; s < n; ++s) {
      for (std::int64_t j = 0; j < m2; ++j) {
        double* row = rows.data() + (s * m2 + j) * (1 + nkl);
        row[0] = out_grid.coords[j];
        for (std::int64_t i = 0; i < nkl; ++i) row[1 + i] = xi[s * nkl + i];
      }
    }
    return rows;
  };

  DeepONetModel don = make_deeponet(nkl * m1, 1 + nkl, cfg.arch.branch_hidden,
                                    cfg.arch.trunk_hidden, cfg.arch.p,
                                    derive_seed(cfg.seed, "model-deeponet"));
  const auto tb = data.train_target.grid.bounds(0);
  don.trunk_lo.assign(1 + nkl, -1.0);
  don.trunk_hi.assign(1 + nkl, 1.0);  // identity on the xi dimensions
  don.trunk_lo[0] = tb[0];
  don.trunk_hi[0] = tb[1];

  const Tensor targets({data.train_target.n_samples, data.train_target.grid.size()},
                       data.train_target.values);
  TrainConfig tc = to_train_config(cfg);
  tc.l1_weight = 0.0;
  ModelOutcome out;
  out.history = train_deeponet_rowwise(don, branch_fixed,
                                       trunk_rows(data.train_input, data.train_target.grid),
                                       targets, tc);
  export_history_csv(out.history, dir / "history_deeponet.csv");

  const Tensor pred = deeponet_predict_rowwise(
      don, branch_fixed, trunk_rows(data.test_input, data.test_target.grid),
      data.test_input.n_samples, data.test_target.grid.size());
  const EvalMetrics em = eval_predictions(pred, data.test_target);
  append_eval_rows(out.rows, "deeponet", em);

  const EnsembleStats ps =
      ensemble_stats(pred.values(), data.test_target.n_samples, data.test_target.grid.size());
  const EnsembleStats rs = ensemble_stats(data.test_target.values, data.test_target.n_samples,
                                          data.test_target.grid.size());
  write_stats_csv(dir / "stats_deeponet.csv", data.test_target.grid, rs, ps);
  return out;
}

ModelOutcome run_pce(const ExperimentConfig& cfg, const Dataset& data,
                     const std::filesystem::path& dir) {
  const PCEBasis pce = pce_basis(cfg.baselines.pce_dim, cfg.baselines.pce_order);
  const KLBasis klb = kl_modes(cfg.kernel, data.train_input.grid, cfg.baselines.pce_dim);
  const MeanFn mean = problem_mean(cfg);

  auto frozen_rows = [&](const FunctionEnsemble& inputs) {
    const std::vector<double> xi = kl_project(klb, inputs, mean);
    Tensor rows({inputs.n_samples, pce.count()});
    std::vector<double> point(cfg.baselines.pce_dim);
    for (std::int64_t s = 0; s < inputs.n_samples; ++s) {
      for (std::int64_t d = 0; d < cfg.baselines.pce_dim; ++d) {
        point[d] = gaussian_to_unit(xi[s * cfg.baselines.pce_dim + d]);
      }
      const std::vector<double> vals = pce_basis_eval(pce, point);
      std::copy(vals.begin(), vals.end(), rows.data() + s * pce.count());
    }
    return rows;
  };

  MultiAutoSpec spec = build_spec(cfg, data, ModelKind::pce);
  spec.p = pce.count();  // matched to the frozen basis width
  MultiAutoModel model = make_multiauto(spec);

  TrainData td = build_train_data(cfg, data);
  td.frozen_basis = frozen_rows(data.train_input);

  ModelOutcome out;
  out.history = train(model, td, to_train_config(cfg));
  save_model(model, dir / "model_pce.bin");
  export_history_csv(out.history, dir / "history_pce.csv");

  const Tensor phi_test = frozen_rows(data.test_input);
  const Tensor pred =
      matmul_nt(phi_test, trunk_sup_coeffs(model, grid_coords(data.test_target.grid)));
  const EvalMetrics em = eval_predictions(pred, data.test_target);
  append_eval_rows(out.rows, "pce", em);
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, const std::string& experiment,
                       const std::vector<MetricRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "experiment,model,metric,value\n";
  for (const MetricRow& r : rows) {
    os << experiment << ',' << r.model << ',' << r.metric << ',' << fmt(r.value) << '\n';
  }
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const std::vector<ModelKind>& models,
                         bool force) {
  namespace fs = std::filesystem;
  const fs::path out = cfg.out;
  fs::path stage = out;
  stage += ".partial";
  fs::remove_all(stage);
  fs::create_directories(stage);
  if (fs::exists(out)) {
    if (!force && fs::exists(out / "metrics.csv")) {
      throw std::runtime_error("run directory already has results: " + out.string() +
                               " (use --force to replace)");
    }
    if (fs::exists(out / "data")) fs::rename(out / "data", stage / "data");
    fs::remove_all(out);
  }

  const Dataset data = ensure_dataset(cfg, stage / "data");

  RunResult result;
  json summary;
  summary["experiment"] = cfg.name;
  for (const ModelKind kind : models) {
    ModelOutcome mo;
    switch (kind) {
      case ModelKind::multiauto: mo = run_multiauto(cfg, data, stage); break;
      case ModelKind::pca: mo = run_pca(cfg, data, stage); break;
      case ModelKind::deeponet: mo = run_deeponet(cfg, data, stage); break;
      case ModelKind::pce: mo = run_pce(cfg, data, stage); break;
    }
    json jm;
    for (const MetricRow& r : mo.rows) jm[r.metric] = r.value;
    jm["epochs_run"] = mo.history.train_loss.size();
    jm["best_epoch"] = mo.history.best_epoch;
    summary["models"][to_string(kind)] = jm;
    result.metrics.insert(result.metrics.end(), mo.rows.begin(), mo.rows.end());
  }

  write_metrics_csv(stage / "metrics.csv", cfg.name, result.metrics);
  {
    std::ofstream os(stage / "summary.json");
    os << summary.dump(2) << '\n';
  }
  json manifest;
  manifest["kind"] = "run";
  manifest["config"] = json::parse(config_to_json_text(cfg));
  manifest["seed"] = cfg.seed;
  manifest["kernels"] = kernels::active().name;
  json files;
  for (const auto& entry : fs::recursive_directory_iterator(stage)) {
    if (entry.is_regular_file()) {
      files[fs::relative(entry.path(), stage).string()] = file_hash_hex(entry.path());
    }
  }
  manifest["files"] = files;
  {
    std::ofstream os(stage / "manifest.json");
    os << manifest.dump(2) << '\n';
  }

  fs::rename(stage, out);
  return result;
}

std::vector<MetricRow> evaluate_run(const std::filesystem::path& run_dir) {
  const ExperimentConfig cfg = load_config(run_dir / "manifest.json");
  const Dataset data = load_dataset(dataset_paths(run_dir / "data"));
  const MultiAutoModel model = load_model(run_dir / "model_multiauto.bin");

  std::vector<MetricRow> rows;
  const Tensor pred = predict_batch(model, encoder_inputs(cfg, data.test_input),
                                    grid_coords(data.test_target.grid));
  append_eval_rows(rows, "multiauto", eval_predictions(pred, data.test_target));
  return rows;
}

void run_sweep(const ExperimentConfig& cfg, const std::vector<std::int64_t>& sensor_counts,
               bool force) {
  namespace fs = std::filesystem;
  if (sensor_counts.empty()) throw std::invalid_argument("sweep: no sensor counts given");
  fs::create_directories(cfg.out);
  std::vector<std::pair<std::int64_t, RunResult>> results;
  for (const std::int64_t nk : sensor_counts) {
    ExperimentConfig sub = cfg;
    sub.input_sensors.assign(cfg.input_sensors.size(), nk);
    sub.name = cfg.name + "-nk" + std::to_string(nk);
    sub.out = cfg.out / ("nk" + std::to_string(nk));
    results.emplace_back(nk, run_experiment(sub, {ModelKind::multiauto}, force));
  }
  std::ofstream os(cfg.out / "sweep.csv");
  if (!os) throw std::runtime_error("cannot write sweep.csv");
  os << "input_sensors,test_mse,avg_rel_l2\n";
  for (const auto& [nk, rr] : results) {
    double mse = 0, rl2 = 0;
    for (const MetricRow& r : rr.metrics) {
      if (r.model == "multiauto" && r.metric == "test_mse") mse = r.value;
      if (r.model == "multiauto" && r.metric == "avg_rel_l2") rl2 = r.value;
    }
    os << nk << ',' << fmt(mse) << ',' << fmt(rl2) << '\n';
  }
}

}  // namespace sdeop
