#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sdeop/multiauto.hpp"
#include "sdeop/stoch.hpp"

namespace sdeop {

enum class Problem { growth_ode, poisson1d_inverse, poisson2d_forward, kdv_forward };

Problem problem_from_string(const std::string& s);
const char* to_string(Problem p);

enum class ModelKind { multiauto, pca, deeponet, pce };

ModelKind model_kind_from_string(const std::string& s);
const char* to_string(ModelKind m);

struct ArchConfig {
  std::int64_t latent = 4;
  std::int64_t p = 60;
  std::vector<std::int64_t> branch_hidden = {60, 60};
  std::vector<std::int64_t> trunk_hidden = {60, 60};
  std::vector<std::int64_t> conv_channels = {8, 16};
  std::vector<std::int64_t> dense_hidden;
  std::int64_t filter = 5;
  std::int64_t stride = 1;
  bool standardize_inputs = true;
};

struct TrainSection {
  std::int64_t epochs = 2000;
  std::int64_t batch = 256;
  double lr = 1e-3;
  double l1_weight = 1e-4;
  std::string l1_targets = "all";  // "all" or "trunks"
  double val_fraction = 0.1;
  std::int64_t patience = 200;
};

struct BaselineSection {
  bool pca = false;
  bool deeponet = false;
  bool pce = false;
  std::int64_t deeponet_kl_modes = 5;
  std::int64_t pce_dim = 3;
  std::int64_t pce_order = 3;
};

// KDE generator evaluation (growth-ode): decode `samples` latent draws and
// compare against a fresh Monte-Carlo reference of `reference` trajectories.
struct GeneratorSection {
  std::int64_t samples = 0;
  std::int64_t reference = 0;
};

struct ExperimentConfig {
  Problem problem = Problem::growth_ode;
  std::string name = "growth-ode";
  std::uint64_t seed = 0;
  std::filesystem::path out = "runs/growth-ode";
  std::int64_t n_train = 1000;
  std::int64_t n_test = 200;
  std::vector<std::int64_t> input_sensors;   // [n] or [nx, ny]
  std::vector<std::int64_t> output_sensors;  // [n], [nx, ny] or [nx, nt]
  KernelSpec kernel;
  std::array<double, 2> length_range = {0.0, 0.0};  // per-trajectory draw when hi > lo
  double field_sigma = 0.1;                         // KdV forcing amplitude
  std::int64_t kl_dim = 3;                          // KdV forcing modes
  std::int64_t forcing_refine = 5;                  // KdV forcing grid refinement
  ArchConfig arch;
  TrainSection train;
  BaselineSection baselines;
  GeneratorSection generator;
};

// Problem defaults; a config file overlays these, CLI flags overlay the file.
ExperimentConfig preset(Problem p);
// Accepts either a bare config or a run manifest (uses its "config" object).
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json_text(const ExperimentConfig& cfg);

TrainConfig to_train_config(const ExperimentConfig& cfg);

// Sensor grids implied by the config.
SensorGrid input_grid(const ExperimentConfig& cfg);
SensorGrid output_grid(const ExperimentConfig& cfg);
// KdV forcing time grid (equals the input grid for that problem).
SensorGrid forcing_grid(const ExperimentConfig& cfg);

MeanFn problem_mean(const ExperimentConfig& cfg);

// ---- datasets -------------------------------------------------------------------

struct DatasetPaths {
  std::filesystem::path dir, train_input, train_target, test_input, test_target, manifest;
};
DatasetPaths dataset_paths(const std::filesystem::path& data_dir);

// Samples inputs, computes solver targets, writes the four ensemble files and
// a manifest with the config echo and content hashes. Deterministic per seed;
// trajectories parallelize across SDEOP_THREADS workers.
void generate_dataset(const ExperimentConfig& cfg, const std::filesystem::path& data_dir);

// One batch of (input, target) trajectories for the configured problem; the
// in-memory form of what generate_dataset writes. Also serves as the
// Monte-Carlo reference sampler for generator evaluation.
void sample_problem(const ExperimentConfig& cfg, std::int64_t n, std::uint64_t seed,
                    FunctionEnsemble& input, FunctionEnsemble& target);

struct Dataset {
  FunctionEnsemble train_input, train_target, test_input, test_target;
};
Dataset load_dataset(const DatasetPaths& paths);
// Generates into cfg-derived paths when missing, then loads.
Dataset ensure_dataset(const ExperimentConfig& cfg, const std::filesystem::path& data_dir);

// ---- experiment runs --------------------------------------------------------------

struct MetricRow {
  std::string model, metric;
  double value;
};

struct RunResult {
  std::vector<MetricRow> metrics;
};

// Trains and evaluates the selected models, writing metrics.csv, history and
// stats files, coefficient dumps and checkpoints into the staged run
// directory (renamed into place on success).
RunResult run_experiment(const ExperimentConfig& cfg, const std::vector<ModelKind>& models,
                         bool force);

// Re-evaluates a finished run from its checkpoint and dataset; returns the
// metric rows that a fresh training run would have produced for multiauto.
std::vector<MetricRow> evaluate_run(const std::filesystem::path& run_dir);

// Sensor-count sweep (multiauto only); one sub-run per count plus sweep.csv.
void run_sweep(const ExperimentConfig& cfg, const std::vector<std::int64_t>& sensor_counts,
               bool force);

// SVG emission from a finished run directory.
void emit_plots(const std::filesystem::path& run_dir);

// FNV-1a 64 content hash, hex encoded.
std::string file_hash_hex(const std::filesystem::path& path);

// Number of worker threads (SDEOP_THREADS, default 1).
int harness_threads();

}  // namespace sdeop
