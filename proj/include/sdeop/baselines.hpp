#pragma once

#include <cstdint>
#include <vector>

#include "sdeop/multiauto.hpp"
#include "sdeop/nn.hpp"
#include "sdeop/stoch.hpp"
#include "sdeop/tensor.hpp"

namespace sdeop {

// ---- PCA input reduction ------------------------------------------------------

struct PCAProjection {
  std::vector<double> mean;        // [n_sensors]
  std::vector<double> components;  // [r, n_sensors], orthonormal rows
  std::int64_t retained = 0;
  std::vector<double> eigenvalues;  // all sample-covariance eigenvalues, descending
};

// Top-r principal directions of the centered samples (eigendecomposition of
// the unbiased sample covariance). Sign fixed so each component's
// largest-magnitude entry is positive.
PCAProjection pca_fit(const FunctionEnsemble& ensemble, std::int64_t r);

// coords[i] = <x - mean, component_i>; returns [n, r] for a [n, sensors] batch.
std::vector<double> pca_project(const PCAProjection& p, const double* values, std::int64_t n);
// mean + coords * components; returns [n, sensors].
std::vector<double> pca_reconstruct(const PCAProjection& p, const double* coords, std::int64_t n);

// ---- generic unstacked DeepONet -----------------------------------------------

// Branch and trunk nets combined by a dot product. The reducer in front of
// the branch (PCA coords, KL data, latent code) is the caller's business,
// which is exactly what makes the code path shareable.
struct DeepONetModel {
  Mlp branch;
  Mlp trunk;
  std::vector<double> trunk_lo, trunk_hi;  // affine map of trunk inputs to [-1,1]
};

DeepONetModel make_deeponet(std::int64_t branch_in, std::int64_t trunk_in,
                            const std::vector<std::int64_t>& branch_hidden,
                            const std::vector<std::int64_t>& trunk_hidden, std::int64_t p,
                            std::uint64_t seed);

// Dot product of branch and trunk outputs for one input pair.
double deeponet_forward(const DeepONetModel& model, const std::vector<double>& branch_in,
                        const std::vector<double>& trunk_in);

Tensor deeponet_branch(const DeepONetModel& model, const Tensor& branch_in);  // [n,db]->[n,p]
Tensor deeponet_trunk(const DeepONetModel& model, const Tensor& trunk_in);    // [m,dt]->[m,p]

ParamList deeponet_params(const DeepONetModel& model);
DeepONetModel bind(const DeepONetModel& model, Graph& g);

// Factored supervised training: per-sample branch rows [N, db], one shared
// trunk grid [m, dt], targets [N, m]. Used by the PCA baseline.
TrainHistory train_deeponet_factored(DeepONetModel& model, const Tensor& branch_rows,
                                     const Tensor& trunk_coords, const Tensor& targets,
                                     const TrainConfig& cfg);

// Row-wise supervised training: one fixed branch input for all samples and a
// trunk input per (sample, sensor) row. Used by the vanilla KL DeepONet where
// the trunk consumes [t, xi_1..xi_N].
TrainHistory train_deeponet_rowwise(DeepONetModel& model, const Tensor& branch_fixed,
                                    const Tensor& trunk_rows, const Tensor& targets,
                                    const TrainConfig& cfg);

Tensor deeponet_predict_factored(const DeepONetModel& model, const Tensor& branch_rows,
                                 const Tensor& trunk_coords);
Tensor deeponet_predict_rowwise(const DeepONetModel& model, const Tensor& branch_fixed,
                                const Tensor& trunk_rows, std::int64_t n, std::int64_t m);

// ---- Legendre / PCE ------------------------------------------------------------

// P_n(x) by recurrence, normalized so P_n(1) = 1. Inputs must lie in [-1,1].
double legendre_eval(std::int64_t degree, double x);

// Total-degree multi-index set over d variables, |alpha| <= q, graded
// lexicographic order; C(d+q, q) indices.
struct PCEBasis {
  std::int64_t dim = 0;
  std::int64_t order = 0;
  std::vector<std::int64_t> indices;  // [count, dim]

  std::int64_t count() const {
    return dim > 0 ? static_cast<std::int64_t>(indices.size()) / dim : 0;
  }
};

PCEBasis pce_basis(std::int64_t dim, std::int64_t order);

// Tensor-product Legendre values for one standardized point xi in [-1,1]^d.
std::vector<double> pce_basis_eval(const PCEBasis& basis, const std::vector<double>& xi);

// Map a standard Gaussian variate through its CDF onto [-1, 1].
double gaussian_to_unit(double x);

}  // namespace sdeop
