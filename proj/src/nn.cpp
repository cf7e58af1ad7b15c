#include "sdeop/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "sdeop/kernels.hpp"
#include "sdeop/rng.hpp"

namespace sdeop {

Activation activation_from_string(const std::string& s) {
  if (s == "identity" || s == "linear") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

Tensor apply_activation(Activation a, const Tensor& x) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::relu: return relu(x);
    case Activation::tanh: return tanh(x);
  }
  throw std::logic_error("bad activation tag");
}

Tensor glorot_uniform(Shape shape, std::int64_t fan_in, std::int64_t fan_out,
                      std::uint64_t seed) {
  if (fan_in <= 0 || fan_out <= 0) throw std::invalid_argument("glorot_uniform: bad fan sizes");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

std::int64_t Mlp::in_dim() const { return layers.front().weight.extent(1); }
std::int64_t Mlp::out_dim() const { return layers.back().weight.extent(0); }

DenseLayer make_dense(std::int64_t in, std::int64_t out, Activation act, std::uint64_t seed) {
  DenseLayer l;
  l.weight = glorot_uniform({out, in}, in, out, seed);
  l.bias = Tensor({out});
  l.act = act;
  return l;
}

ConvLayer make_conv1d(std::int64_t in_ch, std::int64_t out_ch, std::int64_t width,
                      std::int64_t stride, Activation act, std::uint64_t seed) {
  if (stride < 1) throw std::invalid_argument("conv stride must be >= 1");
  ConvLayer l;
  l.kernel = glorot_uniform({out_ch, in_ch, width}, in_ch * width, out_ch * width, seed);
  l.stride = stride;
  l.act = act;
  return l;
}

ConvLayer make_conv2d(std::int64_t in_ch, std::int64_t out_ch, std::int64_t kh, std::int64_t kw,
                      std::int64_t stride, Activation act, std::uint64_t seed) {
  if (stride < 1) throw std::invalid_argument("conv stride must be >= 1");
  ConvLayer l;
  l.kernel = glorot_uniform({out_ch, in_ch, kh, kw}, in_ch * kh * kw, out_ch * kh * kw, seed);
  l.stride = stride;
  l.act = act;
  return l;
}

Mlp make_mlp(const std::vector<std::int64_t>& widths, Activation hidden, Activation final,
             std::uint64_t seed) {
  if (widths.size() < 2) throw std::invalid_argument("make_mlp needs at least [in, out]");
  Mlp net;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool last = i + 2 == widths.size();
    net.layers.push_back(
        make_dense(widths[i], widths[i + 1], last ? final : hidden, derive_seed(seed, "mlp", i)));
  }
  return net;
}

Tensor dense_apply(const DenseLayer& layer, const Tensor& x) {
  // x [n, in] * W^T [in, out] + b
  const std::int64_t out = layer.weight.extent(0), in = layer.weight.extent(1);
  if (x.rank() != 2 || x.extent(1) != in) {
    throw std::invalid_argument("dense_apply: input " + shape_str(x.shape()) +
                                " incompatible with weight " + shape_str(layer.weight.shape()));
  }
  // Materialize W^T once per call; rows of W^T are contiguous for the matmul.
  Tensor wt({in, out});
  for (std::int64_t r = 0; r < out; ++r) {
    for (std::int64_t c = 0; c < in; ++c) wt[c * out + r] = layer.weight[r * in + c];
  }
  Tensor wt_attached = wt;
  if (layer.weight.tracked()) {
    // Route gradients of W^T back to W.
    Graph* g = layer.weight.graph();
    const int wn = layer.weight.node();
    wt_attached = g->attach(std::move(wt), [wn, in, out](Graph& gr, const std::vector<double>& gout) {
      auto& gw = gr.grad(wn);
      for (std::int64_t c = 0; c < in; ++c) {
        for (std::int64_t r = 0; r < out; ++r) gw[r * in + c] += gout[c * out + r];
      }
    });
  }
  Tensor y = add_rowvec(matmul(x, wt_attached), layer.bias);
  return apply_activation(layer.act, y);
}

Tensor conv_apply(const ConvLayer& layer, const Tensor& x) {
  Tensor y = layer.kernel.rank() == 3 ? conv1d(x, layer.kernel, layer.stride)
                                      : conv2d(x, layer.kernel, layer.stride);
  return apply_activation(layer.act, y);
}

Tensor mlp_apply(const Mlp& net, const Tensor& x) {
  Tensor h = x;
  for (const DenseLayer& l : net.layers) h = dense_apply(l, h);
  return h;
}

Tensor l1_penalty(const std::vector<Tensor>& vs) {
  if (vs.empty()) return Tensor::scalar(0.0);
  Tensor total = abs_sum(vs[0]);
  for (std::size_t i = 1; i < vs.size(); ++i) total = add(total, abs_sum(vs[i]));
  return total;
}

void collect_params(const Mlp& net, const std::string& prefix, ParamList& out) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    out.push_back({prefix + ".l" + std::to_string(i) + ".w", net.layers[i].weight});
    out.push_back({prefix + ".l" + std::to_string(i) + ".b", net.layers[i].bias});
  }
}

void Adam::step(ParamList& params, const Gradients& grads) {
  ++t_;
  const double bc1 = 1.0 / (1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
  const double bc2 = 1.0 / (1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
  const auto& kt = kernels::active();
  for (NamedParam& p : params) {
    const Tensor& g = grads.at(p.name);
    if (g.shape() != p.tensor.shape()) {
      throw std::invalid_argument("adam: gradient shape " + shape_str(g.shape()) +
                                  " does not match parameter '" + p.name + "' " +
                                  shape_str(p.tensor.shape()));
    }
    if (!g.all_finite()) {
      throw std::runtime_error("adam: non-finite gradient for parameter '" + p.name + "'");
    }
    Slot& slot = slots_[p.name];
    if (slot.m.empty()) {
      slot.m.assign(p.tensor.size(), 0.0);
      slot.v.assign(p.tensor.size(), 0.0);
    }
    kt.adam_update(p.tensor.data(), slot.m.data(), slot.v.data(), g.data(), p.tensor.size(),
                   cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.eps, bc1, bc2);
  }
}

}  // namespace sdeop
