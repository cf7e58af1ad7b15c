#include "sdeop/uq.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

#include "sdeop/kernels.hpp"
#include "sdeop/rng.hpp"

namespace sdeop {

double KDEModel::density(std::span<const double> point) const {
  if (static_cast<std::int64_t>(point.size()) != dim) {
    throw std::invalid_argument("kde density: point dimension mismatch");
  }
  const double two_pi = 2.0 * 3.141592653589793238462643383279502884;
  double norm = 1.0;
  for (std::int64_t d = 0; d < dim; ++d) norm *= bandwidth[d] * std::sqrt(two_pi);
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    double e = 0.0;
    for (std::int64_t d = 0; d < dim; ++d) {
      const double z = (point[d] - samples[i * dim + d]) / bandwidth[d];
      e += z * z;
    }
    acc += std::exp(-0.5 * e);
  }
  return acc / (static_cast<double>(n) * norm);
}

KDEModel kde_fit(const std::vector<double>& latents, std::int64_t n, std::int64_t dim) {
  if (n < 2) throw std::invalid_argument("kde_fit: need at least two samples");
  if (dim < 1 || static_cast<std::int64_t>(latents.size()) != n * dim) {
    throw std::invalid_argument("kde_fit: latent matrix shape mismatch");
  }
  KDEModel m;
  m.dim = dim;
  m.n = n;
  m.samples = latents;
  m.bandwidth.resize(dim);
  const double factor = std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(dim) + 4.0));
  for (std::int64_t d = 0; d < dim; ++d) {
    double mean = 0.0;
    for (std::int64_t i = 0; i < n; ++i) mean += latents[i * dim + d];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const double c = latents[i * dim + d] - mean;
      var += c * c;
    }
    var /= static_cast<double>(n - 1);
    double bw = factor * std::sqrt(var);
    if (bw <= 0.0) {
      std::cerr << "kde_fit: dimension " << d << " has zero variance, flooring bandwidth\n";
      bw = 1e-8;
    }
    m.bandwidth[d] = bw;
  }
  return m;
}

std::vector<double> kde_sample(const KDEModel& model, std::int64_t count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("kde_sample: need count >= 1");
  std::vector<double> out(static_cast<std::size_t>(count) * model.dim);
  Rng rng(derive_seed(seed, "kde_sample"));
  for (std::int64_t i = 0; i < count; ++i) {
    const std::int64_t pick = rng.uniform_int(model.n);
    for (std::int64_t d = 0; d < model.dim; ++d) {
      out[i * model.dim + d] =
          model.samples[pick * model.dim + d] + model.bandwidth[d] * rng.gaussian();
    }
  }
  return out;
}

std::pair<FunctionEnsemble, FunctionEnsemble> decode_latents(
    const MultiAutoModel& model, const std::vector<double>& latents, std::int64_t count,
    const SensorGrid& unsup_sensors, const SensorGrid& sup_sensors) {
  const std::int64_t d1 = model.spec.trunk_unsup_dim, d2 = model.spec.trunk_sup_dim;
  if (unsup_sensors.dim != d1 || sup_sensors.dim != d2) {
    throw std::invalid_argument("decode_latents: sensor grid dimensions do not match trunks");
  }
  FunctionEnsemble recon, pred;
  recon.grid = unsup_sensors;
  pred.grid = sup_sensors;
  recon.n_samples = count;
  pred.n_samples = count;
  recon.latent_dim = model.spec.latent;
  pred.latent_dim = model.spec.latent;
  recon.latents = latents;
  pred.latents = latents;
  if (count == 0) return {std::move(recon), std::move(pred)};

  const Tensor z({count, model.spec.latent}, latents);
  const Tensor phi = branch_basis(model, z);
  const Tensor a = trunk_unsup_coeffs(
      model, Tensor({unsup_sensors.size(), static_cast<std::int64_t>(d1)}, unsup_sensors.coords));
  const Tensor b = trunk_sup_coeffs(
      model, Tensor({sup_sensors.size(), static_cast<std::int64_t>(d2)}, sup_sensors.coords));
  recon.values = matmul_nt(phi, a).values();
  pred.values = matmul_nt(phi, b).values();
  return {std::move(recon), std::move(pred)};
}

std::pair<FunctionEnsemble, FunctionEnsemble> generate_ensemble(
    const MultiAutoModel& model, const KDEModel& kde, const SensorGrid& unsup_sensors,
    const SensorGrid& sup_sensors, std::int64_t count, std::uint64_t seed) {
  if (kde.dim != model.spec.latent) {
    throw std::invalid_argument("generate_ensemble: KDE dimension does not match latent width");
  }
  std::vector<double> z;
  if (count > 0) z = kde_sample(kde, count, seed);
  return decode_latents(model, z, count, unsup_sensors, sup_sensors);
}

double rel_l2(std::span<const double> pred, std::span<const double> ref) {
  if (pred.size() != ref.size()) throw std::invalid_argument("rel_l2: size mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - ref[i];
    num += d * d;
    den += ref[i] * ref[i];
  }
  if (den == 0.0) throw std::invalid_argument("rel_l2: reference has zero norm");
  return std::sqrt(num / den);
}

double avg_rel_l2(std::span<const double> pred, std::span<const double> ref, std::int64_t n,
                  std::int64_t sensors) {
  if (static_cast<std::int64_t>(pred.size()) != n * sensors || pred.size() != ref.size()) {
    throw std::invalid_argument("avg_rel_l2: shape mismatch");
  }
  double acc = 0.0;
  for (std::int64_t s = 0; s < n; ++s) {
    acc += rel_l2(pred.subspan(s * sensors, sensors), ref.subspan(s * sensors, sensors));
  }
  return acc / static_cast<double>(n);
}

EnsembleStats ensemble_stats(std::span<const double> values, std::int64_t n,
                             std::int64_t sensors) {
  if (n < 2) throw std::invalid_argument("ensemble_stats: variance needs n >= 2");
  if (static_cast<std::int64_t>(values.size()) != n * sensors) {
    throw std::invalid_argument("ensemble_stats: shape mismatch");
  }
  EnsembleStats out;
  out.mean.assign(sensors, 0.0);
  out.variance.assign(sensors, 0.0);
  const auto& kt = kernels::active();
  for (std::int64_t s = 0; s < n; ++s) {
    kt.axpy(1.0, values.data() + s * sensors, out.mean.data(), sensors);
  }
  for (double& v : out.mean) v /= static_cast<double>(n);
  for (std::int64_t s = 0; s < n; ++s) {
    const double* row = values.data() + s * sensors;
    for (std::int64_t j = 0; j < sensors; ++j) {
      const double c = row[j] - out.mean[j];
      out.variance[j] += c * c;
    }
  }
  for (double& v : out.variance) v /= static_cast<double>(n - 1);
  return out;
}

}  // namespace sdeop
