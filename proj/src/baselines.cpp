#include "sdeop/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "sdeop/kernels.hpp"
#include "sdeop/linalg.hpp"
#include "sdeop/rng.hpp"

namespace sdeop {

PCAProjection pca_fit(const FunctionEnsemble& ensemble, std::int64_t r) {
  const std::int64_t n = ensemble.n_samples;
  const std::int64_t m = ensemble.grid.size();
  if (n < 2) throw std::invalid_argument("pca_fit: need at least two samples");
  if (r < 1 || r > std::min(n, m)) {
    throw std::invalid_argument("pca_fit: retained count " + std::to_string(r) +
                                " out of range [1, " + std::to_string(std::min(n, m)) + "]");
  }

  PCAProjection p;
  p.retained = r;
  p.mean.assign(m, 0.0);
  const auto& kt = kernels::active();
  for (std::int64_t s = 0; s < n; ++s) kt.axpy(1.0, ensemble.sample(s), p.mean.data(), m);
  for (double& v : p.mean) v /= static_cast<double>(n);

  // Unbiased sample covariance of the centered data.
  std::vector<double> cov(static_cast<std::size_t>(m) * m, 0.0);
  std::vector<double> xc(m);
  for (std::int64_t s = 0; s < n; ++s) {
    kt.sub(ensemble.sample(s), p.mean.data(), xc.data(), m);
    for (std::int64_t i = 0; i < m; ++i) {
      kt.axpy(xc[i], xc.data(), cov.data() + i * m, m);
    }
  }
  const double inv = 1.0 / static_cast<double>(n - 1);
  for (double& v : cov) v *= inv;

  linalg::SymEigen eig = linalg::sym_eigen(std::move(cov), static_cast<int>(m));
  p.eigenvalues = eig.values;
  p.components.resize(static_cast<std::size_t>(r) * m);
  for (std::int64_t k = 0; k < r; ++k) {
    std::int64_t arg = 0;
    double mag = -1.0;
    for (std::int64_t i = 0; i < m; ++i) {
      const double v = std::fabs(eig.vectors[i * m + k]);
      if (v > mag) {
        mag = v;
        arg = i;
      }
    }
    const double sign = eig.vectors[arg * m + k] >= 0 ? 1.0 : -1.0;
    for (std::int64_t i = 0; i < m; ++i) {
      p.components[k * m + i] = sign * eig.vectors[i * m + k];
    }
  }
  return p;
}

std::vector<double> pca_project(const PCAProjection& p, const double* values, std::int64_t n) {
  const std::int64_t m = static_cast<std::int64_t>(p.mean.size());
  const auto& kt = kernels::active();
  std::vector<double> coords(static_cast<std::size_t>(n) * p.retained);
  std::vector<double> xc(m);
  for (std::int64_t s = 0; s < n; ++s) {
    kt.sub(values + s * m, p.mean.data(), xc.data(), m);
    for (std::int64_t k = 0; k < p.retained; ++k) {
      coords[s * p.retained + k] = kt.dot(xc.data(), p.components.data() + k * m, m);
    }
  }
  return coords;
}

std::vector<double> pca_reconstruct(const PCAProjection& p, const double* coords,
                                    std::int64_t n) {
  const std::int64_t m = static_cast<std::int64_t>(p.mean.size());
  const auto& kt = kernels::active();
  std::vector<double> out(static_cast<std::size_t>(n) * m);
  for (std::int64_t s = 0; s < n; ++s) {
    double* row = out.data() + s * m;
    std::memcpy(row, p.mean.data(), sizeof(double) * static_cast<std::size_t>(m));
    for (std::int64_t k = 0; k < p.retained; ++k) {
      kt.axpy(coords[s * p.retained + k], p.components.data() + k * m, row, m);
    }
  }
  return out;
}

// ---- DeepONet -------------------------------------------------------------------

DeepONetModel make_deeponet(std::int64_t branch_in, std::int64_t trunk_in,
                            const std::vector<std::int64_t>& branch_hidden,
                            const std::vector<std::int64_t>& trunk_hidden, std::int64_t p,
                            std::uint64_t seed) {
  DeepONetModel m;
  std::vector<std::int64_t> bw{branch_in};
  bw.insert(bw.end(), branch_hidden.begin(), branch_hidden.end());
  bw.push_back(p);
  m.branch = make_mlp(bw, Activation::tanh, Activation::identity, derive_seed(seed, "don.branch"));
  std::vector<std::int64_t> tw{trunk_in};
  tw.insert(tw.end(), trunk_hidden.begin(), trunk_hidden.end());
  tw.push_back(p);
  m.trunk = make_mlp(tw, Activation::tanh, Activation::identity, derive_seed(seed, "don.trunk"));
  return m;
}

namespace {

Tensor map_trunk(const DeepONetModel& m, const Tensor& coords) {
  if (m.trunk_lo.empty()) return coords;
  const std::int64_t n = coords.extent(0), d = coords.extent(1);
  if (static_cast<std::int64_t>(m.trunk_lo.size()) != d) {
    throw std::invalid_argument("deeponet trunk map dimension mismatch");
  }
  Tensor out({n, d});
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t k = 0; k < d; ++k) {
      const double span = m.trunk_hi[k] - m.trunk_lo[k];
      out[i * d + k] =
          span != 0.0 ? 2.0 * (coords[i * d + k] - m.trunk_lo[k]) / span - 1.0 : 0.0;
    }
  }
  return out;
}

}  // namespace

double deeponet_forward(const DeepONetModel& model, const std::vector<double>& branch_in,
                        const std::vector<double>& trunk_in) {
  const Tensor phi = deeponet_branch(model, Tensor({1, model.branch.in_dim()}, branch_in));
  const Tensor t = deeponet_trunk(model, Tensor({1, model.trunk.in_dim()}, trunk_in));
  return kernels::active().dot(phi.data(), t.data(), phi.size());
}

Tensor deeponet_branch(const DeepONetModel& model, const Tensor& branch_in) {
  return mlp_apply(model.branch, branch_in);
}

Tensor deeponet_trunk(const DeepONetModel& model, const Tensor& trunk_in) {
  return mlp_apply(model.trunk, map_trunk(model, trunk_in));
}

ParamList deeponet_params(const DeepONetModel& model) {
  ParamList out;
  collect_params(model.branch, "branch", out);
  collect_params(model.trunk, "trunk", out);
  return out;
}

DeepONetModel bind(const DeepONetModel& model, Graph& g) {
  DeepONetModel b = model;
  auto bind_mlp = [&g](Mlp& net, const std::string& prefix) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      net.layers[i].weight = g.leaf(net.layers[i].weight, prefix + ".l" + std::to_string(i) + ".w");
      net.layers[i].bias = g.leaf(net.layers[i].bias, prefix + ".l" + std::to_string(i) + ".b");
    }
  };
  bind_mlp(b.branch, "branch");
  bind_mlp(b.trunk, "trunk");
  return b;
}

namespace {

Tensor gather_rows(const Tensor& t, const std::vector<std::int64_t>& idx) {
  const std::int64_t block = t.size() / t.extent(0);
  Shape shape = t.shape();
  shape[0] = static_cast<std::int64_t>(idx.size());
  Tensor out(shape);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::memcpy(out.data() + static_cast<std::int64_t>(i) * block, t.data() + idx[i] * block,
                sizeof(double) * static_cast<std::size_t>(block));
  }
  return out;
}

// Shared epoch scaffolding for the two DeepONet trainers: shuffled minibatch
// Adam with validation tracking and best-parameter restore.
template <typename BatchLoss, typename FullLoss>
TrainHistory run_epochs(ParamList params, std::int64_t n_total, const TrainConfig& cfg,
                        BatchLoss&& batch_loss, FullLoss&& full_loss) {
  std::vector<std::int64_t> order(n_total);
  for (std::int64_t i = 0; i < n_total; ++i) order[i] = i;
  Rng split_rng(derive_seed(cfg.seed, "split"));
  split_rng.shuffle(order.begin(), order.end());
  const std::int64_t n_val = std::llround(static_cast<double>(n_total) * cfg.val_fraction);
  const std::int64_t n_train = n_total - n_val;
  if (n_train < 1) throw std::invalid_argument("train: empty training split");
  std::vector<std::int64_t> train_idx(order.begin(), order.begin() + n_train);
  const std::vector<std::int64_t> val_idx(order.begin() + n_train, order.end());
  const std::int64_t batch = std::min<std::int64_t>(cfg.batch, n_train);

  Adam opt(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  Rng shuffle_rng(derive_seed(cfg.seed, "epochs"));
  TrainHistory hist;
  std::vector<std::vector<double>> best;
  double best_val = std::numeric_limits<double>::infinity();
  std::int64_t since_best = 0;

  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(train_idx.begin(), train_idx.end());
    double epoch_loss = 0.0;
    for (std::int64_t start = 0; start < n_train; start += batch) {
      const std::int64_t stop = std::min(start + batch, n_train);
      const std::vector<std::int64_t> idx(train_idx.begin() + start, train_idx.begin() + stop);
      Graph g;
      Tensor loss = batch_loss(g, idx);
      const double lv = loss.item();
      if (!std::isfinite(lv)) {
        throw std::runtime_error("training diverged at epoch " + std::to_string(epoch + 1));
      }
      epoch_loss += lv * static_cast<double>(stop - start);
      Gradients grads = g.backward(loss);
      opt.step(params, grads);
    }
    epoch_loss /= static_cast<double>(n_train);
    hist.train_loss.push_back(epoch_loss);
    const double val_loss = n_val ? full_loss(val_idx) : epoch_loss;
    hist.val_loss.push_back(val_loss);

    if (val_loss < best_val) {
      best_val = val_loss;
      hist.best_epoch = epoch;
      since_best = 0;
      if (cfg.patience > 0) {
        best.clear();
        for (const auto& p : params) best.push_back(p.tensor.values());
      }
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  hist.best_val = best_val;
  if (cfg.patience > 0 && !best.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i].tensor.values() = best[i];
  }
  return hist;
}

}  // namespace

TrainHistory train_deeponet_factored(DeepONetModel& model, const Tensor& branch_rows,
                                     const Tensor& trunk_coords, const Tensor& targets,
                                     const TrainConfig& cfg) {
  const std::int64_t n = branch_rows.extent(0);
  if (targets.extent(0) != n) throw std::invalid_argument("train: target rows disagree");

  auto loss_on = [&](const DeepONetModel& m, const Tensor& bx, const Tensor& ty) {
    const Tensor phi = deeponet_branch(m, bx);
    const Tensor tr = deeponet_trunk(m, trunk_coords);
    Tensor total = mse(matmul_nt(phi, tr), ty);
    if (cfg.l1_weight != 0.0) {
      Tensor pen = add(mul(abs_sum(phi), 1.0 / static_cast<double>(phi.extent(0))),
                       mul(abs_sum(tr), 1.0 / static_cast<double>(tr.extent(0))));
      total = add(total, mul(pen, cfg.l1_weight));
    }
    return total;
  };

  return run_epochs(
      deeponet_params(model), n, cfg,
      [&](Graph& g, const std::vector<std::int64_t>& idx) {
        DeepONetModel bound = bind(model, g);
        return loss_on(bound, gather_rows(branch_rows, idx), gather_rows(targets, idx));
      },
      [&](const std::vector<std::int64_t>& idx) {
        return loss_on(model, gather_rows(branch_rows, idx), gather_rows(targets, idx)).item();
      });
}

TrainHistory train_deeponet_rowwise(DeepONetModel& model, const Tensor& branch_fixed,
                                    const Tensor& trunk_rows, const Tensor& targets,
                                    const TrainConfig& cfg) {
  const std::int64_t n = targets.extent(0), m = targets.extent(1);
  if (trunk_rows.extent(0) != n * m) {
    throw std::invalid_argument("train: trunk rows must be n*m, got " +
                                shape_str(trunk_rows.shape()));
  }
  const std::int64_t dt = trunk_rows.extent(1);

  auto gather_trunk = [&](const std::vector<std::int64_t>& idx) {
    Tensor out({static_cast<std::int64_t>(idx.size()) * m, dt});
    for (std::size_t i = 0; i < idx.size(); ++i) {
      std::memcpy(out.data() + static_cast<std::int64_t>(i) * m * dt,
                  trunk_rows.data() + idx[i] * m * dt,
                  sizeof(double) * static_cast<std::size_t>(m * dt));
    }
    return out;
  };

  auto loss_on = [&](const DeepONetModel& mm, const std::vector<std::int64_t>& idx) {
    const Tensor phi = deeponet_branch(mm, branch_fixed);  // [1, p]
    const Tensor tr = deeponet_trunk(mm, gather_trunk(idx));
    const Tensor pred = reshape(matmul_nt(tr, phi), {static_cast<std::int64_t>(idx.size()), m});
    return mse(pred, gather_rows(targets, idx));
  };

  return run_epochs(
      deeponet_params(model), n, cfg,
      [&](Graph& g, const std::vector<std::int64_t>& idx) {
        DeepONetModel bound = bind(model, g);
        return loss_on(bound, idx);
      },
      [&](const std::vector<std::int64_t>& idx) { return loss_on(model, idx).item(); });
}

Tensor deeponet_predict_factored(const DeepONetModel& model, const Tensor& branch_rows,
                                 const Tensor& trunk_coords) {
  return matmul_nt(deeponet_branch(model, branch_rows), deeponet_trunk(model, trunk_coords));
}

Tensor deeponet_predict_rowwise(const DeepONetModel& model, const Tensor& branch_fixed,
                                const Tensor& trunk_rows, std::int64_t n, std::int64_t m) {
  const Tensor phi = deeponet_branch(model, branch_fixed);
  return reshape(matmul_nt(deeponet_trunk(model, trunk_rows), phi), {n, m});
}

// ---- Legendre / PCE ---------------------------------------------------------------

double legendre_eval(std::int64_t degree, double x) {
  if (degree < 0) throw std::invalid_argument("legendre_eval: negative degree");
  if (std::fabs(x) > 1.0 + 1e-12) {
    throw std::invalid_argument("legendre_eval: x = " + std::to_string(x) +
                                " outside [-1, 1]; standardize inputs first");
  }
  if (degree == 0) return 1.0;
  double pm1 = 1.0, p = x;
  for (std::int64_t k = 1; k < degree; ++k) {
    const double pn = ((2.0 * static_cast<double>(k) + 1.0) * x * p -
                       static_cast<double>(k) * pm1) /
                      static_cast<double>(k + 1);
    pm1 = p;
    p = pn;
  }
  return p;
}

namespace {

void enumerate_indices(std::int64_t dim, std::int64_t budget, std::vector<std::int64_t>& current,
                       std::vector<std::int64_t>& out) {
  if (current.size() + 1 == static_cast<std::size_t>(dim)) {
    for (std::int64_t last = 0; last <= budget; ++last) {
      out.insert(out.end(), current.begin(), current.end());
      out.push_back(last);
    }
    return;
  }
  for (std::int64_t v = 0; v <= budget; ++v) {
    current.push_back(v);
    enumerate_indices(dim, budget - v, current, out);
    current.pop_back();
  }
}

}  // namespace

PCEBasis pce_basis(std::int64_t dim, std::int64_t order) {
  if (dim < 1 || order < 0) throw std::invalid_argument("pce_basis: need dim >= 1, order >= 0");
  PCEBasis b;
  b.dim = dim;
  b.order = order;
  if (dim == 1) {
    for (std::int64_t v = 0; v <= order; ++v) b.indices.push_back(v);
    return b;
  }
  // Graded order: all indices of total degree t, t = 0..order.
  for (std::int64_t t = 0; t <= order; ++t) {
    std::vector<std::int64_t> current;
    std::vector<std::int64_t> raw;
    enumerate_indices(dim, t, current, raw);
    for (std::size_t i = 0; i + dim <= raw.size(); i += dim) {
      std::int64_t total = 0;
      for (std::int64_t d = 0; d < dim; ++d) total += raw[i + d];
      if (total == t) b.indices.insert(b.indices.end(), raw.begin() + i, raw.begin() + i + dim);
    }
  }
  return b;
}

std::vector<double> pce_basis_eval(const PCEBasis& basis, const std::vector<double>& xi) {
  if (static_cast<std::int64_t>(xi.size()) != basis.dim) {
    throw std::invalid_argument("pce_basis_eval: point dimension " + std::to_string(xi.size()) +
                                " does not match basis dimension " + std::to_string(basis.dim));
  }
  const std::int64_t count = basis.count();
  std::vector<double> out(count);
  for (std::int64_t i = 0; i < count; ++i) {
    double v = 1.0;
    for (std::int64_t d = 0; d < basis.dim; ++d) {
      v *= legendre_eval(basis.indices[i * basis.dim + d], xi[d]);
    }
    out[i] = v;
  }
  return out;
}

double gaussian_to_unit(double x) { return std::erf(x / std::sqrt(2.0)); }

}  // namespace sdeop
