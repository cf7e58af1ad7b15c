#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "sdeop/multiauto.hpp"
#include "sdeop/stoch.hpp"

namespace sdeop {

// Gaussian kernel density estimate over latent codes with Scott's-rule
// per-dimension bandwidths.
struct KDEModel {
  std::int64_t dim = 0;
  std::int64_t n = 0;
  std::vector<double> samples;     // [n, dim]
  std::vector<double> bandwidth;   // [dim], strictly positive

  double density(std::span<const double> point) const;
};

KDEModel kde_fit(const std::vector<double>& latents, std::int64_t n, std::int64_t dim);

// Smoothed-bootstrap draw: pick a stored latent uniformly, add Gaussian noise
// scaled by the bandwidth. Deterministic per seed.
std::vector<double> kde_sample(const KDEModel& model, std::int64_t count, std::uint64_t seed);

// Draw latents from the KDE and decode through both heads at the given
// sensors. Returns (reconstruction ensemble, prediction ensemble).
std::pair<FunctionEnsemble, FunctionEnsemble> generate_ensemble(
    const MultiAutoModel& model, const KDEModel& kde, const SensorGrid& unsup_sensors,
    const SensorGrid& sup_sensors, std::int64_t count, std::uint64_t seed);

// Decode given latent rows through both heads (the identity path used to
// reproduce training-set predictions).
std::pair<FunctionEnsemble, FunctionEnsemble> decode_latents(
    const MultiAutoModel& model, const std::vector<double>& latents, std::int64_t count,
    const SensorGrid& unsup_sensors, const SensorGrid& sup_sensors);

// ||pred - ref||_2 / ||ref||_2. Throws if the reference has zero norm.
double rel_l2(std::span<const double> pred, std::span<const double> ref);

// Mean over samples of the per-sample relative l2 error; both matrices are
// [n, sensors] row-major.
double avg_rel_l2(std::span<const double> pred, std::span<const double> ref, std::int64_t n,
                  std::int64_t sensors);

// Per-sensor sample mean and unbiased sample variance of an [n, sensors]
// value matrix; n >= 2 for the variance.
struct EnsembleStats {
  std::vector<double> mean;
  std::vector<double> variance;
};
EnsembleStats ensemble_stats(std::span<const double> values, std::int64_t n,
                             std::int64_t sensors);

}  // namespace sdeop
