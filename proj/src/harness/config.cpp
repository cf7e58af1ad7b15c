#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "sdeop/harness.hpp"

namespace sdeop {

using nlohmann::json;

Problem problem_from_string(const std::string& s) {
  if (s == "growth-ode") return Problem::growth_ode;
  if (s == "poisson1d-inverse") return Problem::poisson1d_inverse;
  if (s == "poisson2d-forward") return Problem::poisson2d_forward;
  if (s == "kdv-forward") return Problem::kdv_forward;
  throw std::invalid_argument("unknown problem '" + s + "'");
}

const char* to_string(Problem p) {
  switch (p) {
    case Problem::growth_ode: return "growth-ode";
    case Problem::poisson1d_inverse: return "poisson1d-inverse";
    case Problem::poisson2d_forward: return "poisson2d-forward";
    case Problem::kdv_forward: return "kdv-forward";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "multiauto") return ModelKind::multiauto;
  if (s == "pca") return ModelKind::pca;
  if (s == "deeponet") return ModelKind::deeponet;
  if (s == "pce") return ModelKind::pce;
  throw std::invalid_argument("unknown model '" + s + "'");
}

const char* to_string(ModelKind m) {
  switch (m) {
    case ModelKind::multiauto: return "multiauto";
    case ModelKind::pca: return "pca";
    case ModelKind::deeponet: return "deeponet";
    case ModelKind::pce: return "pce";
  }
  return "?";
}

ExperimentConfig preset(Problem p) {
  ExperimentConfig c;
  c.problem = p;
  c.name = to_string(p);
  c.out = std::filesystem::path("runs") / c.name;
  switch (p) {
    case Problem::growth_ode:
      c.input_sensors = {25};
      c.output_sensors = {25};
      c.kernel = {KernelFamily::squared_exponential, 1.0, 1.5};
      c.length_range = {1.0, 2.0};
      c.n_train = 1000;
      c.n_test = 200;
      c.arch.latent = 4;
      c.baselines.pca = true;
      c.baselines.deeponet = true;
      c.generator = {3000, 10000};
      break;
    case Problem::poisson1d_inverse:
      c.input_sensors = {40};
      c.output_sensors = {40};
      c.kernel = {KernelFamily::squared_exponential, 1.0, 1.5};
      c.n_train = 1000;
      c.n_test = 200;
      c.arch.latent = 4;
      c.baselines.pca = true;
      break;
    case Problem::poisson2d_forward:
      c.input_sensors = {20, 20};
      c.output_sensors = {20, 20};
      c.kernel = {KernelFamily::squared_exponential, 0.5, 1.5};
      c.n_train = 2000;
      c.n_test = 200;
      c.arch.latent = 15;
      c.arch.dense_hidden = {64};
      c.train.epochs = 600;
      c.baselines.pca = true;
      break;
    case Problem::kdv_forward:
      c.input_sensors = {46};       // forcing time grid
      c.output_sensors = {40, 10};  // (x, t)
      c.kernel = {KernelFamily::exponential, 1.0, 0.25};
      c.field_sigma = 0.1;
      c.kl_dim = 3;
      c.n_train = 1000;
      c.n_test = 200;
      c.arch.latent = 4;
      c.train.epochs = 800;
      c.baselines.pca = true;
      break;
  }
  return c;
}

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void overlay(ExperimentConfig& c, const json& j) {
  maybe(j, "name", c.name);
  maybe(j, "seed", c.seed);
  if (j.contains("out")) c.out = j.at("out").get<std::string>();
  maybe(j, "n_train", c.n_train);
  maybe(j, "n_test", c.n_test);
  maybe(j, "input_sensors", c.input_sensors);
  maybe(j, "output_sensors", c.output_sensors);
  if (j.contains("kernel")) {
    const json& k = j.at("kernel");
    if (k.contains("family")) c.kernel.family = kernel_family_from_string(k.at("family"));
    maybe(k, "sigma", c.kernel.sigma);
    maybe(k, "length", c.kernel.length);
  }
  if (j.contains("length_range")) {
    const auto v = j.at("length_range").get<std::vector<double>>();
    if (v.size() != 2) throw std::invalid_argument("config: length_range must be [lo, hi]");
    c.length_range = {v[0], v[1]};
  }
  maybe(j, "field_sigma", c.field_sigma);
  maybe(j, "kl_dim", c.kl_dim);
  maybe(j, "forcing_refine", c.forcing_refine);
  if (j.contains("arch")) {
    const json& a = j.at("arch");
    maybe(a, "latent", c.arch.latent);
    maybe(a, "p", c.arch.p);
    maybe(a, "branch_hidden", c.arch.branch_hidden);
    maybe(a, "trunk_hidden", c.arch.trunk_hidden);
    maybe(a, "conv_channels", c.arch.conv_channels);
    maybe(a, "dense_hidden", c.arch.dense_hidden);
    maybe(a, "filter", c.arch.filter);
    maybe(a, "stride", c.arch.stride);
    maybe(a, "standardize_inputs", c.arch.standardize_inputs);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    maybe(t, "epochs", c.train.epochs);
    maybe(t, "batch", c.train.batch);
    maybe(t, "lr", c.train.lr);
    maybe(t, "l1_weight", c.train.l1_weight);
    maybe(t, "l1_targets", c.train.l1_targets);
    maybe(t, "val_fraction", c.train.val_fraction);
    maybe(t, "patience", c.train.patience);
  }
  if (j.contains("baselines")) {
    const json& b = j.at("baselines");
    maybe(b, "pca", c.baselines.pca);
    maybe(b, "deeponet", c.baselines.deeponet);
    maybe(b, "pce", c.baselines.pce);
    maybe(b, "deeponet_kl_modes", c.baselines.deeponet_kl_modes);
    maybe(b, "pce_dim", c.baselines.pce_dim);
    maybe(b, "pce_order", c.baselines.pce_order);
  }
  if (j.contains("generator")) {
    const json& g = j.at("generator");
    maybe(g, "samples", c.generator.samples);
    maybe(g, "reference", c.generator.reference);
  }
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["problem"] = to_string(c.problem);
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["out"] = c.out.string();
  j["n_train"] = c.n_train;
  j["n_test"] = c.n_test;
  j["input_sensors"] = c.input_sensors;
  j["output_sensors"] = c.output_sensors;
  j["kernel"] = {{"family", to_string(c.kernel.family)},
                 {"sigma", c.kernel.sigma},
                 {"length", c.kernel.length}};
  j["length_range"] = {c.length_range[0], c.length_range[1]};
  j["field_sigma"] = c.field_sigma;
  j["kl_dim"] = c.kl_dim;
  j["forcing_refine"] = c.forcing_refine;
  j["arch"] = {{"latent", c.arch.latent},
               {"p", c.arch.p},
               {"branch_hidden", c.arch.branch_hidden},
               {"trunk_hidden", c.arch.trunk_hidden},
               {"conv_channels", c.arch.conv_channels},
               {"dense_hidden", c.arch.dense_hidden},
               {"filter", c.arch.filter},
               {"stride", c.arch.stride},
               {"standardize_inputs", c.arch.standardize_inputs}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch", c.train.batch},
                {"lr", c.train.lr},
                {"l1_weight", c.train.l1_weight},
                {"l1_targets", c.train.l1_targets},
                {"val_fraction", c.train.val_fraction},
                {"patience", c.train.patience}};
  j["baselines"] = {{"pca", c.baselines.pca},
                    {"deeponet", c.baselines.deeponet},
                    {"pce", c.baselines.pce},
                    {"deeponet_kl_modes", c.baselines.deeponet_kl_modes},
                    {"pce_dim", c.baselines.pce_dim},
                    {"pce_order", c.baselines.pce_order}};
  j["generator"] = {{"samples", c.generator.samples}, {"reference", c.generator.reference}};
  return j;
}

}  // namespace

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("config parse error in " + path.string() + ": " + e.what());
  }
  if (j.contains("config")) j = j.at("config");  // run manifest
  if (!j.contains("problem")) throw std::runtime_error("config: missing 'problem'");
  ExperimentConfig c = preset(problem_from_string(j.at("problem").get<std::string>()));
  overlay(c, j);
  return c;
}

std::string config_to_json_text(const ExperimentConfig& cfg) { return to_json(cfg).dump(2); }

TrainConfig to_train_config(const ExperimentConfig& cfg) {
  TrainConfig t;
  t.epochs = cfg.train.epochs;
  t.batch = cfg.train.batch;
  t.lr = cfg.train.lr;
  t.l1_weight = cfg.train.l1_weight;
  if (cfg.train.l1_targets == "all") {
    t.l1_targets = L1Targets::all;
  } else if (cfg.train.l1_targets == "trunks") {
    t.l1_targets = L1Targets::trunks_only;
  } else {
    throw std::invalid_argument("config: l1_targets must be 'all' or 'trunks'");
  }
  t.val_fraction = cfg.train.val_fraction;
  t.patience = cfg.train.patience;
  t.seed = cfg.seed;
  return t;
}

SensorGrid input_grid(const ExperimentConfig& cfg) {
  switch (cfg.problem) {
    case Problem::growth_ode:
      if (cfg.input_sensors.size() != 1) throw std::invalid_argument("growth-ode: input_sensors must be [n]");
      return SensorGrid::line(0.0, 1.0, cfg.input_sensors[0]);
    case Problem::poisson1d_inverse:
      if (cfg.input_sensors.size() != 1) throw std::invalid_argument("poisson1d: input_sensors must be [n]");
      return SensorGrid::interior(-1.0, 1.0, cfg.input_sensors[0]);
    case Problem::poisson2d_forward: {
      if (cfg.input_sensors.size() != 2) throw std::invalid_argument("poisson2d: input_sensors must be [nx, ny]");
      return SensorGrid::product(SensorGrid::interior(-1.0, 1.0, cfg.input_sensors[0]),
                                 SensorGrid::interior(-1.0, 1.0, cfg.input_sensors[1]));
    }
    case Problem::kdv_forward:
      return forcing_grid(cfg);
  }
  throw std::logic_error("bad problem");
}

SensorGrid output_grid(const ExperimentConfig& cfg) {
  switch (cfg.problem) {
    case Problem::growth_ode:
      if (cfg.output_sensors.size() != 1) throw std::invalid_argument("growth-ode: output_sensors must be [n]");
      return SensorGrid::line(0.0, 1.0, cfg.output_sensors[0]);
    case Problem::poisson1d_inverse:
      if (cfg.output_sensors.size() != 1) throw std::invalid_argument("poisson1d: output_sensors must be [n]");
      return SensorGrid::interior(-1.0, 1.0, cfg.output_sensors[0]);
    case Problem::poisson2d_forward:
      if (cfg.output_sensors.size() != 2) throw std::invalid_argument("poisson2d: output_sensors must be [nx, ny]");
      return SensorGrid::product(SensorGrid::interior(-1.0, 1.0, cfg.output_sensors[0]),
                                 SensorGrid::interior(-1.0, 1.0, cfg.output_sensors[1]));
    case Problem::kdv_forward:
      if (cfg.output_sensors.size() != 2) throw std::invalid_argument("kdv: output_sensors must be [nx, nt]");
      return SensorGrid::product(SensorGrid::line(0.0, 4.0, cfg.output_sensors[0]),
                                 SensorGrid::line(0.0, 0.1, cfg.output_sensors[1]));
  }
  throw std::logic_error("bad problem");
}

SensorGrid forcing_grid(const ExperimentConfig& cfg) {
  if (cfg.problem != Problem::kdv_forward) {
    throw std::logic_error("forcing_grid is specific to the KdV problem");
  }
  if (cfg.output_sensors.size() != 2) throw std::invalid_argument("kdv: output_sensors must be [nx, nt]");
  // Refined so that every output query time is a forcing-grid node.
  const std::int64_t nt = cfg.forcing_refine * (cfg.output_sensors[1] - 1) + 1;
  return SensorGrid::line(0.0, 0.1, nt);
}

MeanFn problem_mean(const ExperimentConfig& cfg) {
  const double pi = 3.141592653589793238462643383279502884;
  switch (cfg.problem) {
    case Problem::growth_ode:
    case Problem::kdv_forward:
      return MeanFn{};
    case Problem::poisson1d_inverse:
      return [pi](const double* x) { return std::sin(pi * x[0]); };
    case Problem::poisson2d_forward:
      return [pi](const double* x) { return 20.0 * std::sin(pi * (x[0] + x[1])); };
  }
  throw std::logic_error("bad problem");
}

}  // namespace sdeop
