#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sdeop/tensor.hpp"

namespace sdeop {

enum class Activation { identity, relu, tanh };

Activation activation_from_string(const std::string& s);
const char* to_string(Activation a);
Tensor apply_activation(Activation a, const Tensor& x);

// Glorot-uniform values in +-sqrt(6/(fan_in+fan_out)), deterministic per seed.
Tensor glorot_uniform(Shape shape, std::int64_t fan_in, std::int64_t fan_out,
                      std::uint64_t seed);

struct DenseLayer {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]
  Activation act = Activation::identity;
};

// Dense stack; the building block of branch and trunk nets.
struct Mlp {
  std::vector<DenseLayer> layers;
  std::int64_t in_dim() const;
  std::int64_t out_dim() const;
};

struct ConvLayer {
  Tensor kernel;  // [oc,ic,w] or [oc,ic,kh,kw]
  std::int64_t stride = 1;
  Activation act = Activation::identity;
};

DenseLayer make_dense(std::int64_t in, std::int64_t out, Activation act, std::uint64_t seed);
ConvLayer make_conv1d(std::int64_t in_ch, std::int64_t out_ch, std::int64_t width,
                      std::int64_t stride, Activation act, std::uint64_t seed);
ConvLayer make_conv2d(std::int64_t in_ch, std::int64_t out_ch, std::int64_t kh, std::int64_t kw,
                      std::int64_t stride, Activation act, std::uint64_t seed);

// Widths [in, h1, ..., out]; hidden activation on all but the last layer.
Mlp make_mlp(const std::vector<std::int64_t>& widths, Activation hidden, Activation final,
             std::uint64_t seed);

// x [n, in] -> [n, out]
Tensor dense_apply(const DenseLayer& layer, const Tensor& x);
Tensor conv_apply(const ConvLayer& layer, const Tensor& x);
Tensor mlp_apply(const Mlp& net, const Tensor& x);

// Sum of absolute values over all entries of all tensors. Backward is the
// sign, with subgradient 0 at 0.
Tensor l1_penalty(const std::vector<Tensor>& vs);

// Named parameter sharing the owning model's buffer.
struct NamedParam {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

void collect_params(const Mlp& net, const std::string& prefix, ParamList& out);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam with bias correction. One shared step counter; per-parameter
// moment buffers keyed by name.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // In-place update of every parameter with its gradient. Throws on a
  // non-finite gradient, naming the parameter.
  void step(ParamList& params, const Gradients& grads);

  std::int64_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  struct Slot {
    std::vector<double> m, v;
  };
  std::map<std::string, Slot> slots_;
  std::int64_t t_ = 0;
  AdamConfig cfg_;
};

}  // namespace sdeop
