#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "sdeop/nn.hpp"
#include "sdeop/tensor.hpp"

namespace sdeop {

// Convolutional encoder followed by dense layers down to the latent width.
struct EncoderSpec {
  int input_rank = 1;                       // 1: sequences [C,L]; 2: grids [C,H,W]
  std::vector<std::int64_t> input_extent;   // [L] or [H,W]
  std::int64_t input_channels = 1;
  std::vector<std::int64_t> conv_channels = {8, 16};
  std::int64_t filter = 5;
  std::int64_t stride = 1;
  std::vector<std::int64_t> dense_hidden;   // dense widths between flatten and latent
  Activation conv_act = Activation::relu;
  Activation dense_act = Activation::relu;
  Activation latent_act = Activation::identity;
};

// Architecture of the full model: encoder to z, shared branch z -> phi in R^p,
// unsupervised trunk x -> a in R^p, supervised trunk x' -> b in R^p. The two
// trunk input dimensions may differ (multi-resolution queries).
struct MultiAutoSpec {
  EncoderSpec encoder;
  std::int64_t latent = 4;
  std::int64_t p = 60;
  std::vector<std::int64_t> branch_hidden = {60, 60};
  std::vector<std::int64_t> trunk_hidden = {60, 60};
  std::int64_t trunk_unsup_dim = 1;
  std::int64_t trunk_sup_dim = 1;
  Activation net_act = Activation::tanh;  // branch/trunk hidden activation
  std::uint64_t seed = 0;

  // Input standardization (x - shift) / scale applied before the encoder,
  // and per-dimension affine maps of trunk inputs to [-1, 1]. Fixed at
  // training time and stored with the checkpoint.
  double input_shift = 0.0;
  double input_scale = 1.0;
  std::vector<double> unsup_lo, unsup_hi;
  std::vector<double> sup_lo, sup_hi;
};

struct MultiAutoModel {
  MultiAutoSpec spec;
  std::vector<ConvLayer> enc_conv;
  std::vector<DenseLayer> enc_dense;
  Mlp branch;
  Mlp trunk_unsup;
  Mlp trunk_sup;
};

MultiAutoModel make_multiauto(const MultiAutoSpec& spec);

// Named views of every parameter (buffers shared with the model).
ParamList model_params(const MultiAutoModel& model);

// Tracked view of the model: same buffers, every parameter registered as a
// leaf of g. Consumed by one forward/backward pass.
MultiAutoModel bind(const MultiAutoModel& model, Graph& g);

// Batched forward passes. encode_batch takes [n,C,L] (rank 1 encoders) or
// [n,C,H,W]; returns [n, latent].
Tensor encode_batch(const MultiAutoModel& model, const Tensor& inputs);
Tensor branch_basis(const MultiAutoModel& model, const Tensor& z);          // [n,latent]->[n,p]
Tensor trunk_unsup_coeffs(const MultiAutoModel& model, const Tensor& x);    // [m,d1]->[m,p]
Tensor trunk_sup_coeffs(const MultiAutoModel& model, const Tensor& x);      // [m,d2]->[m,p]

// Single-sample conveniences.
std::vector<double> encode(const MultiAutoModel& model, const Tensor& values);
double reconstruct(const MultiAutoModel& model, const std::vector<double>& z,
                   const std::vector<double>& x);
double predict(const MultiAutoModel& model, const std::vector<double>& z,
               const std::vector<double>& x);

// Which subnet outputs the L1 penalty sees.
enum class L1Targets { all, trunks_only };

struct TrainConfig {
  std::int64_t epochs = 2000;
  std::int64_t batch = 256;
  double lr = 1e-3;
  double l1_weight = 1e-4;
  L1Targets l1_targets = L1Targets::all;
  double val_fraction = 0.1;
  std::int64_t patience = 200;  // early stop on validation plateau; 0 disables
  std::uint64_t seed = 0;
};

struct TrainHistory {
  std::vector<double> train_loss, val_loss;
  std::int64_t best_epoch = -1;
  double best_val = 0.0;
};

// Everything the training loop needs. targets_k are the reconstruction
// targets at the unsup-trunk sensors (the encoder inputs, flattened);
// targets_u are the solution values at the sup-trunk sensors. For the
// frozen-basis (PCE) variant, frozen_basis holds one basis row per sample
// and the encoder/branch path is bypassed.
struct TrainData {
  Tensor inputs;        // [N, C, L] or [N, C, H, W]
  Tensor targets_k;     // [N, m1]
  Tensor targets_u;     // [N, m2]
  Tensor unsup_coords;  // [m1, d1]
  Tensor sup_coords;    // [m2, d2]
  std::optional<Tensor> frozen_basis;  // [N, p]
};

struct LossParts {
  Tensor total;
  double mse_k = 0.0, mse_u = 0.0, penalty = 0.0;
};

// Eq-style combined loss: MSE_k + MSE_u + l1_weight * penalty, where the
// penalty is the L1 of the a/b/phi output rows averaged per row. All three
// summands are reported separately.
LossParts multiauto_loss(const MultiAutoModel& bound, const Tensor& inputs,
                         const Tensor& targets_k, const Tensor& targets_u,
                         const Tensor& unsup_coords, const Tensor& sup_coords, double l1_weight,
                         L1Targets l1_targets,
                         const std::optional<Tensor>& frozen_basis = std::nullopt);

// Mini-batch Adam over shuffled epochs; deterministic per config seed.
// Early stopping restores the best-validation parameters. Throws if the
// loss turns non-finite, naming the epoch.
TrainHistory train(MultiAutoModel& model, const TrainData& data, const TrainConfig& cfg);

// Untracked batched predictions at the given trunk coordinates.
Tensor predict_batch(const MultiAutoModel& model, const Tensor& inputs, const Tensor& sup_coords);
Tensor reconstruct_batch(const MultiAutoModel& model, const Tensor& inputs,
                         const Tensor& unsup_coords);

// Self-describing binary checkpoint; parameters round-trip bit-exactly.
void save_model(const MultiAutoModel& model, const std::filesystem::path& path);
MultiAutoModel load_model(const std::filesystem::path& path);

void export_history_csv(const TrainHistory& h, const std::filesystem::path& path);

}  // namespace sdeop
