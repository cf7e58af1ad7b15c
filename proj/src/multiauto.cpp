#include "sdeop/multiauto.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "sdeop/kernels.hpp"
#include "sdeop/rng.hpp"

namespace sdeop {

namespace {

using nlohmann::json;

// Spatial extents after the conv stack.
std::vector<std::int64_t> conv_out_extent(const EncoderSpec& e) {
  std::vector<std::int64_t> ext = e.input_extent;
  for (std::size_t c = 0; c < e.conv_channels.size(); ++c) {
    for (auto& d : ext) {
      if (e.filter > d) {
        throw std::invalid_argument("encoder: filter " + std::to_string(e.filter) +
                                    " exceeds remaining extent " + std::to_string(d));
      }
      d = (d - e.filter) / e.stride + 1;
    }
  }
  return ext;
}

std::int64_t flatten_width(const EncoderSpec& e) {
  const auto ext = conv_out_extent(e);
  std::int64_t n = e.conv_channels.empty() ? e.input_channels : e.conv_channels.back();
  for (const auto d : ext) n *= d;
  return n;
}

Tensor standardize_inputs(const MultiAutoSpec& spec, const Tensor& x) {
  if (spec.input_shift == 0.0 && spec.input_scale == 1.0) return x;
  const double inv = 1.0 / spec.input_scale;
  Tensor out(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i) out[i] = (x[i] - spec.input_shift) * inv;
  return out;
}

// Affine map of trunk coordinates to [-1, 1] per dimension.
Tensor map_coords(const Tensor& coords, const std::vector<double>& lo,
                  const std::vector<double>& hi) {
  if (lo.empty()) return coords;
  const std::int64_t m = coords.extent(0), d = coords.extent(1);
  if (static_cast<std::int64_t>(lo.size()) != d || static_cast<std::int64_t>(hi.size()) != d) {
    throw std::invalid_argument("trunk coordinate map dimension mismatch");
  }
  Tensor out({m, d});
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t k = 0; k < d; ++k) {
      const double span = hi[k] - lo[k];
      out[i * d + k] =
          span != 0.0 ? 2.0 * (coords[i * d + k] - lo[k]) / span - 1.0 : 0.0;
    }
  }
  return out;
}

}  // namespace

MultiAutoModel make_multiauto(const MultiAutoSpec& spec) {
  if (spec.encoder.input_rank != 1 && spec.encoder.input_rank != 2) {
    throw std::invalid_argument("encoder input rank must be 1 or 2");
  }
  if (static_cast<int>(spec.encoder.input_extent.size()) != spec.encoder.input_rank) {
    throw std::invalid_argument("encoder input extent rank mismatch");
  }
  if (spec.latent < 1 || spec.p < 1) throw std::invalid_argument("latent and p must be positive");

  MultiAutoModel m;
  m.spec = spec;

  std::int64_t ch = spec.encoder.input_channels;
  for (std::size_t i = 0; i < spec.encoder.conv_channels.size(); ++i) {
    const std::int64_t out_ch = spec.encoder.conv_channels[i];
    const std::uint64_t s = derive_seed(spec.seed, "enc.conv", i);
    m.enc_conv.push_back(spec.encoder.input_rank == 1
                             ? make_conv1d(ch, out_ch, spec.encoder.filter, spec.encoder.stride,
                                           spec.encoder.conv_act, s)
                             : make_conv2d(ch, out_ch, spec.encoder.filter, spec.encoder.filter,
                                           spec.encoder.stride, spec.encoder.conv_act, s));
    ch = out_ch;
  }
  std::vector<std::int64_t> widths{flatten_width(spec.encoder)};
  widths.insert(widths.end(), spec.encoder.dense_hidden.begin(), spec.encoder.dense_hidden.end());
  widths.push_back(spec.latent);
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool last = i + 2 == widths.size();
    m.enc_dense.push_back(make_dense(widths[i], widths[i + 1],
                                     last ? spec.encoder.latent_act : spec.encoder.dense_act,
                                     derive_seed(spec.seed, "enc.dense", i)));
  }

  std::vector<std::int64_t> bw{spec.latent};
  bw.insert(bw.end(), spec.branch_hidden.begin(), spec.branch_hidden.end());
  bw.push_back(spec.p);
  m.branch = make_mlp(bw, spec.net_act, Activation::identity, derive_seed(spec.seed, "branch"));

  std::vector<std::int64_t> t1{spec.trunk_unsup_dim};
  t1.insert(t1.end(), spec.trunk_hidden.begin(), spec.trunk_hidden.end());
  t1.push_back(spec.p);
  m.trunk_unsup = make_mlp(t1, spec.net_act, Activation::identity,
                           derive_seed(spec.seed, "trunk_unsup"));

  std::vector<std::int64_t> t2{spec.trunk_sup_dim};
  t2.insert(t2.end(), spec.trunk_hidden.begin(), spec.trunk_hidden.end());
  t2.push_back(spec.p);
  m.trunk_sup = make_mlp(t2, spec.net_act, Activation::identity,
                         derive_seed(spec.seed, "trunk_sup"));
  return m;
}

ParamList model_params(const MultiAutoModel& model) {
  ParamList out;
  for (std::size_t i = 0; i < model.enc_conv.size(); ++i) {
    out.push_back({"enc.conv" + std::to_string(i) + ".k", model.enc_conv[i].kernel});
  }
  for (std::size_t i = 0; i < model.enc_dense.size(); ++i) {
    out.push_back({"enc.dense" + std::to_string(i) + ".w", model.enc_dense[i].weight});
    out.push_back({"enc.dense" + std::to_string(i) + ".b", model.enc_dense[i].bias});
  }
  collect_params(model.branch, "branch", out);
  collect_params(model.trunk_unsup, "trunk_unsup", out);
  collect_params(model.trunk_sup, "trunk_sup", out);
  return out;
}

MultiAutoModel bind(const MultiAutoModel& model, Graph& g) {
  MultiAutoModel b = model;
  for (std::size_t i = 0; i < b.enc_conv.size(); ++i) {
    b.enc_conv[i].kernel = g.leaf(b.enc_conv[i].kernel, "enc.conv" + std::to_string(i) + ".k");
  }
  for (std::size_t i = 0; i < b.enc_dense.size(); ++i) {
    b.enc_dense[i].weight = g.leaf(b.enc_dense[i].weight, "enc.dense" + std::to_string(i) + ".w");
    b.enc_dense[i].bias = g.leaf(b.enc_dense[i].bias, "enc.dense" + std::to_string(i) + ".b");
  }
  auto bind_mlp = [&g](Mlp& net, const std::string& prefix) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      net.layers[i].weight = g.leaf(net.layers[i].weight, prefix + ".l" + std::to_string(i) + ".w");
      net.layers[i].bias = g.leaf(net.layers[i].bias, prefix + ".l" + std::to_string(i) + ".b");
    }
  };
  bind_mlp(b.branch, "branch");
  bind_mlp(b.trunk_unsup, "trunk_unsup");
  bind_mlp(b.trunk_sup, "trunk_sup");
  return b;
}

Tensor encode_batch(const MultiAutoModel& model, const Tensor& inputs) {
  const EncoderSpec& e = model.spec.encoder;
  const std::int64_t want_rank = e.input_rank + 2;  // batch + channels + spatial
  if (inputs.rank() != want_rank) {
    throw std::invalid_argument("encode: expected rank-" + std::to_string(want_rank) +
                                " batch, got " + shape_str(inputs.shape()));
  }
  if (inputs.extent(1) != e.input_channels) {
    throw std::invalid_argument("encode: channel count mismatch, got " +
                                shape_str(inputs.shape()));
  }
  for (int d = 0; d < e.input_rank; ++d) {
    if (inputs.extent(2 + d) != e.input_extent[d]) {
      throw std::invalid_argument("encode: input extent mismatch, got " +
                                  shape_str(inputs.shape()) + " for encoder extent " +
                                  shape_str(e.input_extent));
    }
  }
  Tensor h = standardize_inputs(model.spec, inputs);
  for (const ConvLayer& layer : model.enc_conv) h = conv_apply(layer, h);
  h = reshape(h, {inputs.extent(0), h.size() / inputs.extent(0)});
  for (const DenseLayer& layer : model.enc_dense) h = dense_apply(layer, h);
  return h;
}

Tensor branch_basis(const MultiAutoModel& model, const Tensor& z) {
  return mlp_apply(model.branch, z);
}

Tensor trunk_unsup_coeffs(const MultiAutoModel& model, const Tensor& x) {
  return mlp_apply(model.trunk_unsup, map_coords(x, model.spec.unsup_lo, model.spec.unsup_hi));
}

Tensor trunk_sup_coeffs(const MultiAutoModel& model, const Tensor& x) {
  return mlp_apply(model.trunk_sup, map_coords(x, model.spec.sup_lo, model.spec.sup_hi));
}

std::vector<double> encode(const MultiAutoModel& model, const Tensor& values) {
  const EncoderSpec& e = model.spec.encoder;
  if (values.rank() != e.input_rank + 1) {
    throw std::invalid_argument("encode: single sample must be rank " +
                                std::to_string(e.input_rank + 1) + ", got " +
                                shape_str(values.shape()));
  }
  Shape batched{1};
  for (const auto d : values.shape()) batched.push_back(d);
  const Tensor z = encode_batch(model, reshape(values, batched));
  return z.values();
}

double reconstruct(const MultiAutoModel& model, const std::vector<double>& z,
                   const std::vector<double>& x) {
  const Tensor phi = branch_basis(model, Tensor({1, model.spec.latent}, z));
  const Tensor a =
      trunk_unsup_coeffs(model, Tensor({1, model.spec.trunk_unsup_dim}, x));
  return kernels::active().dot(phi.data(), a.data(), model.spec.p);
}

double predict(const MultiAutoModel& model, const std::vector<double>& z,
               const std::vector<double>& x) {
  const Tensor phi = branch_basis(model, Tensor({1, model.spec.latent}, z));
  const Tensor b = trunk_sup_coeffs(model, Tensor({1, model.spec.trunk_sup_dim}, x));
  return kernels::active().dot(phi.data(), b.data(), model.spec.p);
}

LossParts multiauto_loss(const MultiAutoModel& bound, const Tensor& inputs,
                         const Tensor& targets_k, const Tensor& targets_u,
                         const Tensor& unsup_coords, const Tensor& sup_coords, double l1_weight,
                         L1Targets l1_targets, const std::optional<Tensor>& frozen_basis) {
  if (targets_k.rank() != 2 || targets_u.rank() != 2) {
    throw std::invalid_argument("loss: targets must be [n, sensors]");
  }
  const std::int64_t n = targets_k.extent(0);
  if (n == 0 || targets_u.extent(0) != n) {
    throw std::invalid_argument("loss: empty batch or inconsistent target rows");
  }

  Tensor phi = frozen_basis ? *frozen_basis : branch_basis(bound, encode_batch(bound, inputs));
  const Tensor a = trunk_unsup_coeffs(bound, unsup_coords);
  const Tensor b = trunk_sup_coeffs(bound, sup_coords);

  const Tensor lk = mse(matmul_nt(phi, a), targets_k);
  const Tensor lu = mse(matmul_nt(phi, b), targets_u);

  LossParts parts;
  parts.mse_k = lk.item();
  parts.mse_u = lu.item();
  if (!std::isfinite(parts.mse_k)) throw std::runtime_error("loss: reconstruction MSE is non-finite");
  if (!std::isfinite(parts.mse_u)) throw std::runtime_error("loss: prediction MSE is non-finite");

  Tensor total = add(lk, lu);

  const double m1 = static_cast<double>(a.extent(0));
  const double m2 = static_cast<double>(b.extent(0));
  const bool include_phi = l1_targets == L1Targets::all && !frozen_basis;
  if (l1_weight != 0.0) {
    Tensor pen = add(mul(abs_sum(a), 1.0 / m1), mul(abs_sum(b), 1.0 / m2));
    if (include_phi) pen = add(pen, mul(abs_sum(phi), 1.0 / static_cast<double>(n)));
    parts.penalty = pen.item();
    if (!std::isfinite(parts.penalty)) throw std::runtime_error("loss: L1 penalty is non-finite");
    total = add(total, mul(pen, l1_weight));
  } else {
    const auto& kt = kernels::active();
    parts.penalty = kt.abs_sum(a.data(), a.size()) / m1 + kt.abs_sum(b.data(), b.size()) / m2;
    if (include_phi) {
      parts.penalty += kt.abs_sum(phi.data(), phi.size()) / static_cast<double>(n);
    }
  }
  parts.total = total;
  return parts;
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

std::vector<std::vector<double>> snapshot(const ParamList& params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor.values());
  return out;
}

void restore(ParamList& params, const std::vector<std::vector<double>>& snap) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i].tensor.values() = snap[i];
}

}  // namespace

TrainHistory train(MultiAutoModel& model, const TrainData& data, const TrainConfig& cfg) {
  const std::int64_t n_total = data.inputs.extent(0);
  if (data.targets_k.extent(0) != n_total || data.targets_u.extent(0) != n_total) {
    throw std::invalid_argument("train: input/target row counts disagree");
  }
  if (data.frozen_basis && data.frozen_basis->extent(0) != n_total) {
    throw std::invalid_argument("train: frozen basis row count disagrees");
  }
  if (cfg.epochs < 0 || cfg.batch < 1) throw std::invalid_argument("train: bad epoch/batch config");

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

  const Tensor val_inputs = n_val ? gather_rows(data.inputs, val_idx) : Tensor();
  const Tensor val_k = n_val ? gather_rows(data.targets_k, val_idx) : Tensor();
  const Tensor val_u = n_val ? gather_rows(data.targets_u, val_idx) : Tensor();
  std::optional<Tensor> val_basis;
  if (data.frozen_basis && n_val) val_basis = gather_rows(*data.frozen_basis, val_idx);

  ParamList params = model_params(model);
  Adam opt(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  Rng shuffle_rng(derive_seed(cfg.seed, "epochs"));

  TrainHistory hist;
  std::vector<std::vector<double>> best_params;
  double best_val = std::numeric_limits<double>::infinity();
  std::int64_t since_best = 0;

  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(train_idx.begin(), train_idx.end());
    double epoch_loss = 0.0;
    for (std::int64_t start = 0; start < n_train; start += batch) {
      const std::int64_t stop = std::min(start + batch, n_train);
      const std::vector<std::int64_t> idx(train_idx.begin() + start, train_idx.begin() + stop);
      const Tensor bx = gather_rows(data.inputs, idx);
      const Tensor bk = gather_rows(data.targets_k, idx);
      const Tensor bu = gather_rows(data.targets_u, idx);
      std::optional<Tensor> bb;
      if (data.frozen_basis) bb = gather_rows(*data.frozen_basis, idx);

      Graph g;
      MultiAutoModel bound = bind(model, g);
      LossParts lp;
      try {
        lp = multiauto_loss(bound, bx, bk, bu, data.unsup_coords, data.sup_coords, cfg.l1_weight,
                            cfg.l1_targets, bb);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("training diverged at epoch " + std::to_string(epoch + 1) + ": " +
                                 e.what());
      }
      const double lv = lp.total.item();
      if (!std::isfinite(lv)) {
        throw std::runtime_error("training diverged at epoch " + std::to_string(epoch + 1));
      }
      epoch_loss += lv * static_cast<double>(stop - start);
      Gradients grads = g.backward(lp.total);
      opt.step(params, grads);
    }
    epoch_loss /= static_cast<double>(n_train);
    hist.train_loss.push_back(epoch_loss);

    double val_loss = epoch_loss;
    if (n_val) {
      const LossParts vp = multiauto_loss(model, val_inputs, val_k, val_u, data.unsup_coords,
                                          data.sup_coords, cfg.l1_weight, cfg.l1_targets,
                                          val_basis);
      val_loss = vp.total.item();
    }
    hist.val_loss.push_back(val_loss);

    if (val_loss < best_val) {
      best_val = val_loss;
      hist.best_epoch = epoch;
      since_best = 0;
      if (cfg.patience > 0) best_params = snapshot(params);
    } else {
      ++since_best;
      if (cfg.patience > 0 && since_best >= cfg.patience) break;
    }
  }
  hist.best_val = best_val;
  if (cfg.patience > 0 && !best_params.empty()) restore(params, best_params);
  return hist;
}

Tensor predict_batch(const MultiAutoModel& model, const Tensor& inputs,
                     const Tensor& sup_coords) {
  const Tensor phi = branch_basis(model, encode_batch(model, inputs));
  return matmul_nt(phi, trunk_sup_coeffs(model, sup_coords));
}

Tensor reconstruct_batch(const MultiAutoModel& model, const Tensor& inputs,
                         const Tensor& unsup_coords) {
  const Tensor phi = branch_basis(model, encode_batch(model, inputs));
  return matmul_nt(phi, trunk_unsup_coeffs(model, unsup_coords));
}

// ---- checkpoint io ------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'S', 'D', 'M', 'C'};
constexpr std::uint32_t kVersion = 1;

json spec_to_json(const MultiAutoSpec& s) {
  json j;
  j["encoder"] = {{"input_rank", s.encoder.input_rank},
                  {"input_extent", s.encoder.input_extent},
                  {"input_channels", s.encoder.input_channels},
                  {"conv_channels", s.encoder.conv_channels},
                  {"filter", s.encoder.filter},
                  {"stride", s.encoder.stride},
                  {"dense_hidden", s.encoder.dense_hidden},
                  {"conv_act", to_string(s.encoder.conv_act)},
                  {"dense_act", to_string(s.encoder.dense_act)},
                  {"latent_act", to_string(s.encoder.latent_act)}};
  j["latent"] = s.latent;
  j["p"] = s.p;
  j["branch_hidden"] = s.branch_hidden;
  j["trunk_hidden"] = s.trunk_hidden;
  j["trunk_unsup_dim"] = s.trunk_unsup_dim;
  j["trunk_sup_dim"] = s.trunk_sup_dim;
  j["net_act"] = to_string(s.net_act);
  j["seed"] = s.seed;
  j["input_shift"] = s.input_shift;
  j["input_scale"] = s.input_scale;
  j["unsup_lo"] = s.unsup_lo;
  j["unsup_hi"] = s.unsup_hi;
  j["sup_lo"] = s.sup_lo;
  j["sup_hi"] = s.sup_hi;
  return j;
}

MultiAutoSpec spec_from_json(const json& j) {
  MultiAutoSpec s;
  const json& e = j.at("encoder");
  s.encoder.input_rank = e.at("input_rank").get<int>();
  s.encoder.input_extent = e.at("input_extent").get<std::vector<std::int64_t>>();
  s.encoder.input_channels = e.at("input_channels").get<std::int64_t>();
  s.encoder.conv_channels = e.at("conv_channels").get<std::vector<std::int64_t>>();
  s.encoder.filter = e.at("filter").get<std::int64_t>();
  s.encoder.stride = e.at("stride").get<std::int64_t>();
  s.encoder.dense_hidden = e.at("dense_hidden").get<std::vector<std::int64_t>>();
  s.encoder.conv_act = activation_from_string(e.at("conv_act").get<std::string>());
  s.encoder.dense_act = activation_from_string(e.at("dense_act").get<std::string>());
  s.encoder.latent_act = activation_from_string(e.at("latent_act").get<std::string>());
  s.latent = j.at("latent").get<std::int64_t>();
  s.p = j.at("p").get<std::int64_t>();
  s.branch_hidden = j.at("branch_hidden").get<std::vector<std::int64_t>>();
  s.trunk_hidden = j.at("trunk_hidden").get<std::vector<std::int64_t>>();
  s.trunk_unsup_dim = j.at("trunk_unsup_dim").get<std::int64_t>();
  s.trunk_sup_dim = j.at("trunk_sup_dim").get<std::int64_t>();
  s.net_act = activation_from_string(j.at("net_act").get<std::string>());
  s.seed = j.at("seed").get<std::uint64_t>();
  s.input_shift = j.at("input_shift").get<double>();
  s.input_scale = j.at("input_scale").get<double>();
  s.unsup_lo = j.at("unsup_lo").get<std::vector<double>>();
  s.unsup_hi = j.at("unsup_hi").get<std::vector<double>>();
  s.sup_lo = j.at("sup_lo").get<std::vector<double>>();
  s.sup_hi = j.at("sup_hi").get<std::vector<double>>();
  return s;
}

template <typename T>
void write_pod(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

void save_model(const MultiAutoModel& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  os.write(kMagic, 4);
  write_pod(os, kVersion);
  const std::string spec = spec_to_json(model.spec).dump();
  write_pod(os, static_cast<std::uint64_t>(spec.size()));
  os.write(spec.data(), static_cast<std::streamsize>(spec.size()));

  const ParamList params = model_params(model);
  write_pod(os, static_cast<std::uint64_t>(params.size()));
  for (const auto& p : params) {
    write_pod(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_pod(os, static_cast<std::uint32_t>(p.tensor.rank()));
    for (const auto d : p.tensor.shape()) write_pod(os, d);
    os.write(reinterpret_cast<const char*>(p.tensor.data()),
             static_cast<std::streamsize>(p.tensor.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("short write: " + path.string());
}

MultiAutoModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not a checkpoint file (bad magic): " + path.string());
  }
  std::uint32_t version = 0;
  read_pod(is, version);
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  std::uint64_t spec_len = 0;
  read_pod(is, spec_len);
  if (!is || spec_len > (1u << 20)) throw std::runtime_error("corrupt checkpoint header");
  std::string spec_text(spec_len, '\0');
  is.read(spec_text.data(), static_cast<std::streamsize>(spec_len));
  MultiAutoModel model;
  try {
    model = make_multiauto(spec_from_json(json::parse(spec_text)));
  } catch (const json::exception& e) {
    throw std::runtime_error("corrupt checkpoint spec: " + std::string(e.what()));
  }

  ParamList params = model_params(model);
  std::uint64_t count = 0;
  read_pod(is, count);
  if (count != params.size()) {
    throw std::runtime_error("checkpoint parameter count " + std::to_string(count) +
                             " does not match architecture (" + std::to_string(params.size()) +
                             ")");
  }
  for (auto& p : params) {
    std::uint32_t name_len = 0;
    read_pod(is, name_len);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (name != p.name) {
      throw std::runtime_error("checkpoint parameter '" + name + "' does not match expected '" +
                               p.name + "'");
    }
    std::uint32_t rank = 0;
    read_pod(is, rank);
    Shape shape(rank);
    for (auto& d : shape) read_pod(is, d);
    if (shape != p.tensor.shape()) {
      throw std::runtime_error("checkpoint shape mismatch for '" + name + "': " +
                               shape_str(shape) + " vs " + shape_str(p.tensor.shape()));
    }
    is.read(reinterpret_cast<char*>(p.tensor.data()),
            static_cast<std::streamsize>(p.tensor.size() * sizeof(double)));
  }
  if (!is) throw std::runtime_error("truncated checkpoint: " + path.string());
  return model;
}

void export_history_csv(const TrainHistory& h, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  os << "epoch,train_loss,val_loss\n";
  char buf[64];
  for (std::size_t i = 0; i < h.train_loss.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", i + 1, h.train_loss[i], h.val_loss[i]);
    os << buf;
  }
}

}  // namespace sdeop
