// Command-line harness: dataset generation, training, evaluation, model
// comparison, sensor sweeps and SVG plots for the four benchmark problems.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sdeop/harness.hpp"
#include "sdeop/kernels.hpp"

namespace {

struct CommonOpts {
  std::string config;
  std::string out;
  std::int64_t seed = -1;
  bool force = false;
};

sdeop::ExperimentConfig resolve(const CommonOpts& o) {
  if (o.config.empty()) throw std::runtime_error("--config is required");
  sdeop::ExperimentConfig cfg = sdeop::load_config(o.config);
  if (!o.out.empty()) cfg.out = o.out;
  if (o.seed >= 0) cfg.seed = static_cast<std::uint64_t>(o.seed);
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config, "experiment config or run manifest (JSON)")->required();
  cmd->add_option("--out", o.out, "override the output directory");
  cmd->add_option("--seed", o.seed, "override the experiment seed");
  cmd->add_flag("--force", o.force, "replace an existing run directory");
}

void print_metrics(const std::vector<sdeop::MetricRow>& rows) {
  for (const auto& r : rows) {
    std::printf("%-10s %-14s %.6g\n", r.model.c_str(), r.metric.c_str(), r.value);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stochastic operator learning harness"};
  app.require_subcommand(1);

  CommonOpts gen_o, train_o, cmp_o, sweep_o;
  std::string train_model = "multiauto";
  std::string eval_run, plot_run;
  std::vector<std::int64_t> sweep_sensors{10, 15, 20, 25};

  CLI::App* gen = app.add_subcommand("generate", "sample a dataset and write ensemble files");
  add_common(gen, gen_o);

  CLI::App* train = app.add_subcommand("train", "train a model and evaluate it on the test set");
  add_common(train, train_o);
  train->add_option("--model", train_model, "multiauto|pca|deeponet|pce");

  CLI::App* eval = app.add_subcommand("evaluate", "re-evaluate a finished run from its checkpoint");
  eval->add_option("--run", eval_run, "run directory")->required();

  CLI::App* cmp = app.add_subcommand("compare", "train multiauto plus the configured baselines");
  add_common(cmp, cmp_o);

  CLI::App* plot = app.add_subcommand("plot", "emit SVG plots for a finished run");
  plot->add_option("--run", plot_run, "run directory")->required();

  CLI::App* sweep = app.add_subcommand("sweep", "input-sensor sweep (multiauto)");
  add_common(sweep, sweep_o);
  sweep->add_option("--sensors", sweep_sensors, "input sensor counts");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const auto cfg = resolve(gen_o);
      sdeop::generate_dataset(cfg, cfg.out / "data");
      std::printf("dataset written to %s\n", (cfg.out / "data").string().c_str());
    } else if (train->parsed()) {
      const auto cfg = resolve(train_o);
      const auto result = sdeop::run_experiment(
          cfg, {sdeop::model_kind_from_string(train_model)}, train_o.force);
      print_metrics(result.metrics);
      std::printf("run written to %s\n", cfg.out.string().c_str());
    } else if (eval->parsed()) {
      print_metrics(sdeop::evaluate_run(eval_run));
    } else if (cmp->parsed()) {
      const auto cfg = resolve(cmp_o);
      std::vector<sdeop::ModelKind> models{sdeop::ModelKind::multiauto};
      if (cfg.baselines.deeponet) models.push_back(sdeop::ModelKind::deeponet);
      if (cfg.baselines.pca) models.push_back(sdeop::ModelKind::pca);
      if (cfg.baselines.pce) models.push_back(sdeop::ModelKind::pce);
      const auto result = sdeop::run_experiment(cfg, models, cmp_o.force);
      print_metrics(result.metrics);
      std::printf("run written to %s\n", cfg.out.string().c_str());
    } else if (plot->parsed()) {
      sdeop::emit_plots(plot_run);
      std::printf("plots written to %s\n", plot_run.c_str());
    } else if (sweep->parsed()) {
      const auto cfg = resolve(sweep_o);
      sdeop::run_sweep(cfg, sweep_sensors, sweep_o.force);
      std::printf("sweep written to %s\n", cfg.out.string().c_str());
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
