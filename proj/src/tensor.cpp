#include "sdeop/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "sdeop/kernels.hpp"
#include "sdeop/linalg.hpp"

namespace sdeop {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

std::int64_t shape_size(const Shape& s) {
  std::int64_t n = 1;
  for (const std::int64_t e : s) n *= e;
  return n;
}

namespace {

void check_shape(const Shape& s) {
  for (const std::int64_t e : s) {
    if (e <= 0) throw std::invalid_argument("tensor extents must be positive: " + shape_str(s));
  }
}

Graph* result_graph(std::initializer_list<const Tensor*> ins) {
  Graph* g = nullptr;
  for (const Tensor* t : ins) {
    if (t->tracked()) {
      if (g && g != t->graph()) {
        throw std::invalid_argument("operands belong to different graphs");
      }
      g = t->graph();
    }
  }
  return g;
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_ = std::make_shared<std::vector<double>>(shape_size(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  check_shape(shape_);
  if (shape_size(shape_) != static_cast<std::int64_t>(values.size())) {
    throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape_));
  }
  data_ = std::make_shared<std::vector<double>>(std::move(values));
}

Tensor Tensor::full(Shape shape, double v) {
  Tensor t(std::move(shape));
  for (double& x : *t.data_) x = v;
  return t;
}

std::int64_t Tensor::size() const { return data_ ? static_cast<std::int64_t>(data_->size()) : 0; }

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item() on tensor of shape " + shape_str(shape_));
  return (*data_)[0];
}

Tensor Tensor::detached() const {
  Tensor t = *this;
  t.graph_ = nullptr;
  t.node_ = -1;
  return t;
}

Tensor Tensor::clone() const {
  Tensor t;
  t.shape_ = shape_;
  t.data_ = std::make_shared<std::vector<double>>(*data_);
  return t;
}

bool Tensor::all_finite() const {
  for (const double v : *data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

const Tensor& Gradients::at(const std::string& name) const {
  auto it = by_name.find(name);
  if (it == by_name.end()) throw std::out_of_range("no gradient for parameter '" + name + "'");
  return it->second;
}

int Graph::add_node(std::int64_t out_size, BackwardFn fn) {
  if (consumed_) throw std::logic_error("graph already consumed by backward");
  nodes_.push_back(Node{out_size, std::move(fn)});
  grads_.emplace_back();
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor Graph::attach(Tensor out, BackwardFn fn) {
  const int id = add_node(out.size(), std::move(fn));
  out.graph_ = this;
  out.node_ = id;
  return out;
}

std::vector<double>& Graph::grad(int node) {
  auto& g = grads_[node];
  if (g.empty()) g.assign(nodes_[node].size, 0.0);
  return g;
}

Tensor Graph::leaf(const Tensor& t, const std::string& name) {
  if (t.tracked()) throw std::invalid_argument("leaf() input is already tracked");
  Tensor out = t;
  out.graph_ = this;
  out.node_ = add_node(t.size(), nullptr);
  leaves_.emplace_back(name, out);
  return out;
}

Tensor Graph::track(const Tensor& t) {
  if (t.tracked()) throw std::invalid_argument("track() input is already tracked");
  Tensor out = t;
  out.graph_ = this;
  out.node_ = add_node(t.size(), nullptr);
  return out;
}

Gradients Graph::backward(const Tensor& loss) {
  if (consumed_) throw std::logic_error("graph already consumed by backward");
  if (!loss.tracked() || loss.graph() != this) {
    throw std::invalid_argument("backward: loss was not produced by this graph");
  }
  if (loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss.shape()));
  }
  grad(loss.node())[0] = 1.0;
  for (int i = loss.node(); i >= 0; --i) {
    if (!grads_[i].empty() && nodes_[i].backward) nodes_[i].backward(*this, grads_[i]);
  }
  Gradients out;
  for (auto& [name, tensor] : leaves_) {
    auto& g = grads_[tensor.node()];
    if (g.empty()) g.assign(tensor.size(), 0.0);
    out.by_name.insert_or_assign(name, Tensor(tensor.shape(), std::move(g)));
  }
  consumed_ = true;
  return out;
}

// ---- matmul -----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw std::invalid_argument("matmul expects rank-2 operands, got " + shape_str(a.shape()) +
                                " and " + shape_str(b.shape()));
  }
  const std::int64_t n = a.extent(0), k = a.extent(1), m = b.extent(1);
  if (b.extent(0) != k) {
    throw std::invalid_argument("matmul: inner extents differ, " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  }
  Tensor out({n, m});
  linalg::matmul(a.data(), b.data(), out.data(), n, k, m);

  Graph* g = result_graph({&a, &b});
  if (!g) return out;
  const int an = a.node(), bn = b.node();
  return g->attach(std::move(out), [a, b, an, bn, n, k, m](Graph& gr, const std::vector<double>& gout) {
    const auto& kt = kernels::active();
    if (an >= 0) {
      auto& ga = gr.grad(an);
      for (std::int64_t i = 0; i < n; ++i) {
        const double* grow = gout.data() + i * m;
        double* garow = ga.data() + i * k;
        for (std::int64_t kk = 0; kk < k; ++kk) {
          garow[kk] += kt.dot(grow, b.data() + kk * m, m);
        }
      }
    }
    if (bn >= 0) {
      auto& gb = gr.grad(bn);
      for (std::int64_t i = 0; i < n; ++i) {
        const double* arow = a.data() + i * k;
        const double* grow = gout.data() + i * m;
        for (std::int64_t kk = 0; kk < k; ++kk) {
          kt.axpy(arow[kk], grow, gb.data() + kk * m, m);
        }
      }
    }
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(1)) {
    throw std::invalid_argument("matmul_nt: need [n,p] x [m,p], got " + shape_str(a.shape()) +
                                " and " + shape_str(b.shape()));
  }
  const std::int64_t n = a.extent(0), p = a.extent(1), m = b.extent(0);
  Tensor out({n, m});
  const auto& kt = kernels::active();
  for (std::int64_t i = 0; i < n; ++i) {
    const double* arow = a.data() + i * p;
    double* orow = out.data() + i * m;
    for (std::int64_t j = 0; j < m; ++j) orow[j] = kt.dot(arow, b.data() + j * p, p);
  }
  Graph* g = result_graph({&a, &b});
  if (!g) return out;
  const int an = a.node(), bn = b.node();
  return g->attach(std::move(out), [a, b, an, bn, n, p, m](Graph& gr, const std::vector<double>& gout) {
    const auto& kt2 = kernels::active();
    if (an >= 0) {
      auto& ga = gr.grad(an);
      for (std::int64_t i = 0; i < n; ++i) {
        const double* grow = gout.data() + i * m;
        double* garow = ga.data() + i * p;
        for (std::int64_t j = 0; j < m; ++j) kt2.axpy(grow[j], b.data() + j * p, garow, p);
      }
    }
    if (bn >= 0) {
      auto& gb = gr.grad(bn);
      for (std::int64_t i = 0; i < n; ++i) {
        const double* grow = gout.data() + i * m;
        const double* arow = a.data() + i * p;
        for (std::int64_t j = 0; j < m; ++j) kt2.axpy(grow[j], arow, gb.data() + j * p, p);
      }
    }
  });
}

// ---- convolutions -----------------------------------------------------------

namespace {

struct ConvDims {
  std::int64_t batch, in_ch, out_ch;
  bool batched;
};

}  // namespace

Tensor conv1d(const Tensor& input, const Tensor& kernel, std::int64_t stride) {
  if (kernel.rank() != 3) {
    throw std::invalid_argument("conv1d kernel must be [out,in,width], got " +
                                shape_str(kernel.shape()));
  }
  if (input.rank() != 2 && input.rank() != 3) {
    throw std::invalid_argument("conv1d input must be [ch,len] or [batch,ch,len], got " +
                                shape_str(input.shape()));
  }
  if (stride < 1) throw std::invalid_argument("conv1d stride must be positive");
  const bool batched = input.rank() == 3;
  const std::int64_t nb = batched ? input.extent(0) : 1;
  const std::int64_t ci = batched ? input.extent(1) : input.extent(0);
  const std::int64_t len = batched ? input.extent(2) : input.extent(1);
  const std::int64_t co = kernel.extent(0), ck = kernel.extent(1), w = kernel.extent(2);
  if (ck != ci) {
    throw std::invalid_argument("conv1d channel mismatch: input " + shape_str(input.shape()) +
                                ", kernel " + shape_str(kernel.shape()));
  }
  if (w > len) {
    throw std::invalid_argument("conv1d kernel width " + std::to_string(w) +
                                " exceeds input length " + std::to_string(len));
  }
  const std::int64_t lo = (len - w) / stride + 1;

  Tensor out(batched ? Shape{nb, co, lo} : Shape{co, lo});
  const auto& kt = kernels::active();
  for (std::int64_t s = 0; s < nb; ++s) {
    for (std::int64_t oc = 0; oc < co; ++oc) {
      double* orow = out.data() + (s * co + oc) * lo;
      for (std::int64_t ic = 0; ic < ci; ++ic) {
        const double* xrow = input.data() + (s * ci + ic) * len;
        const double* krow = kernel.data() + (oc * ci + ic) * w;
        for (std::int64_t j = 0; j < w; ++j) {
          const double kv = krow[j];
          if (stride == 1) {
            kt.axpy(kv, xrow + j, orow, lo);
          } else {
            for (std::int64_t t = 0; t < lo; ++t) orow[t] += kv * xrow[t * stride + j];
          }
        }
      }
    }
  }

  Graph* g = result_graph({&input, &kernel});
  if (!g) return out;
  const int xn = input.node(), kn = kernel.node();
  auto back = [=, x = input, ker = kernel](Graph& gr, const std::vector<double>& gout) {
    const auto& k2 = kernels::active();
    if (xn >= 0) {
      auto& gx = gr.grad(xn);
      for (std::int64_t s = 0; s < nb; ++s) {
        for (std::int64_t oc = 0; oc < co; ++oc) {
          const double* grow = gout.data() + (s * co + oc) * lo;
          for (std::int64_t ic = 0; ic < ci; ++ic) {
            double* gxrow = gx.data() + (s * ci + ic) * len;
            const double* krow = ker.data() + (oc * ci + ic) * w;
            for (std::int64_t j = 0; j < w; ++j) {
              if (stride == 1) {
                k2.axpy(krow[j], grow, gxrow + j, lo);
              } else {
                for (std::int64_t t = 0; t < lo; ++t) gxrow[t * stride + j] += krow[j] * grow[t];
              }
            }
          }
        }
      }
    }
    if (kn >= 0) {
      auto& gk = gr.grad(kn);
      for (std::int64_t s = 0; s < nb; ++s) {
        for (std::int64_t oc = 0; oc < co; ++oc) {
          const double* grow = gout.data() + (s * co + oc) * lo;
          for (std::int64_t ic = 0; ic < ci; ++ic) {
            const double* xrow = x.data() + (s * ci + ic) * len;
            double* gkrow = gk.data() + (oc * ci + ic) * w;
            for (std::int64_t j = 0; j < w; ++j) {
              if (stride == 1) {
                gkrow[j] += k2.dot(grow, xrow + j, lo);
              } else {
                double acc = 0.0;
                for (std::int64_t t = 0; t < lo; ++t) acc += grow[t] * xrow[t * stride + j];
                gkrow[j] += acc;
              }
            }
          }
        }
      }
    }
  };
  return g->attach(std::move(out), std::move(back));
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::int64_t stride) {
  if (kernel.rank() != 4) {
    throw std::invalid_argument("conv2d kernel must be [out,in,kh,kw], got " +
                                shape_str(kernel.shape()));
  }
  if (input.rank() != 3 && input.rank() != 4) {
    throw std::invalid_argument("conv2d input must be [ch,h,w] or [batch,ch,h,w], got " +
                                shape_str(input.shape()));
  }
  if (stride < 1) throw std::invalid_argument("conv2d stride must be positive");
  const bool batched = input.rank() == 4;
  const std::int64_t nb = batched ? input.extent(0) : 1;
  const std::int64_t ci = batched ? input.extent(1) : input.extent(0);
  const std::int64_t h = batched ? input.extent(2) : input.extent(1);
  const std::int64_t wd = batched ? input.extent(3) : input.extent(2);
  const std::int64_t co = kernel.extent(0), ck = kernel.extent(1);
  const std::int64_t kh = kernel.extent(2), kw = kernel.extent(3);
  if (ck != ci) {
    throw std::invalid_argument("conv2d channel mismatch: input " + shape_str(input.shape()) +
                                ", kernel " + shape_str(kernel.shape()));
  }
  if (kh > h || kw > wd) {
    throw std::invalid_argument("conv2d kernel " + shape_str(kernel.shape()) +
                                " exceeds input " + shape_str(input.shape()));
  }
  const std::int64_t ho = (h - kh) / stride + 1;
  const std::int64_t wo = (wd - kw) / stride + 1;

  Tensor out(batched ? Shape{nb, co, ho, wo} : Shape{co, ho, wo});
  const auto& kt = kernels::active();
  for (std::int64_t s = 0; s < nb; ++s) {
    for (std::int64_t oc = 0; oc < co; ++oc) {
      double* oplane = out.data() + (s * co + oc) * ho * wo;
      for (std::int64_t ic = 0; ic < ci; ++ic) {
        const double* xplane = input.data() + (s * ci + ic) * h * wd;
        const double* kplane = kernel.data() + (oc * ci + ic) * kh * kw;
        for (std::int64_t r = 0; r < kh; ++r) {
          for (std::int64_t cidx = 0; cidx < kw; ++cidx) {
            const double kv = kplane[r * kw + cidx];
            for (std::int64_t i = 0; i < ho; ++i) {
              const double* xrow = xplane + (i * stride + r) * wd + cidx;
              double* orow = oplane + i * wo;
              if (stride == 1) {
                kt.axpy(kv, xrow, orow, wo);
              } else {
                for (std::int64_t j = 0; j < wo; ++j) orow[j] += kv * xrow[j * stride];
              }
            }
          }
        }
      }
    }
  }

  Graph* g = result_graph({&input, &kernel});
  if (!g) return out;
  const int xn = input.node(), kn = kernel.node();
  auto back = [=, x = input, ker = kernel](Graph& gr, const std::vector<double>& gout) {
    const auto& k2 = kernels::active();
    if (xn >= 0) {
      auto& gx = gr.grad(xn);
      for (std::int64_t s = 0; s < nb; ++s) {
        for (std::int64_t oc = 0; oc < co; ++oc) {
          const double* gplane = gout.data() + (s * co + oc) * ho * wo;
          for (std::int64_t ic = 0; ic < ci; ++ic) {
            double* gxplane = gx.data() + (s * ci + ic) * h * wd;
            const double* kplane = ker.data() + (oc * ci + ic) * kh * kw;
            for (std::int64_t r = 0; r < kh; ++r) {
              for (std::int64_t cidx = 0; cidx < kw; ++cidx) {
                const double kv = kplane[r * kw + cidx];
                for (std::int64_t i = 0; i < ho; ++i) {
                  const double* grow = gplane + i * wo;
                  double* gxrow = gxplane + (i * stride + r) * wd + cidx;
                  if (stride == 1) {
                    k2.axpy(kv, grow, gxrow, wo);
                  } else {
                    for (std::int64_t j = 0; j < wo; ++j) gxrow[j * stride] += kv * grow[j];
                  }
                }
              }
            }
          }
        }
      }
    }
    if (kn >= 0) {
      auto& gk = gr.grad(kn);
      for (std::int64_t s = 0; s < nb; ++s) {
        for (std::int64_t oc = 0; oc < co; ++oc) {
          const double* gplane = gout.data() + (s * co + oc) * ho * wo;
          for (std::int64_t ic = 0; ic < ci; ++ic) {
            const double* xplane = x.data() + (s * ci + ic) * h * wd;
            double* gkplane = gk.data() + (oc * ci + ic) * kh * kw;
            for (std::int64_t r = 0; r < kh; ++r) {
              for (std::int64_t cidx = 0; cidx < kw; ++cidx) {
                double acc = 0.0;
                for (std::int64_t i = 0; i < ho; ++i) {
                  const double* grow = gplane + i * wo;
                  const double* xrow = xplane + (i * stride + r) * wd + cidx;
                  if (stride == 1) {
                    acc += k2.dot(grow, xrow, wo);
                  } else {
                    for (std::int64_t j = 0; j < wo; ++j) acc += grow[j] * xrow[j * stride];
                  }
                }
                gkplane[r * kw + cidx] += acc;
              }
            }
          }
        }
      }
    }
  };
  return g->attach(std::move(out), std::move(back));
}

// ---- elementwise ------------------------------------------------------------

namespace {

void require_equal_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shapes differ, " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  // Scalar-vs-tensor broadcast covers either side; otherwise shapes must match.
  if (a.size() == 1 && b.size() != 1) return add(b, a.item());
  if (b.size() == 1 && a.size() != 1) return add(a, b.item());
  require_equal_shape(a, b, "add");
  const std::int64_t n = a.size();
  Tensor out(a.shape());
  kernels::active().add(a.data(), b.data(), out.data(), n);
  Graph* g = result_graph({&a, &b});
  if (!g) return out;
  const int an = a.node(), bn = b.node();
  return g->attach(std::move(out), [an, bn, n](Graph& gr, const std::vector<double>& gout) {
    const auto& kt = kernels::active();
    if (an >= 0) kt.axpy(1.0, gout.data(), gr.grad(an).data(), n);
    if (bn >= 0) kt.axpy(1.0, gout.data(), gr.grad(bn).data(), n);
  });
}

Tensor add(const Tensor& a, double s) {
  const std::int64_t n = a.size();
  Tensor out(a.shape());
  for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] + s;
  Graph* g = result_graph({&a});
  if (!g) return out;
  const int an = a.node();
  return g->attach(std::move(out), [an, n](Graph& gr, const std::vector<double>& gout) {
    kernels::active().axpy(1.0, gout.data(), gr.grad(an).data(), n);
  });
}

Tensor add_rowvec(const Tensor& x, const Tensor& row) {
  if (x.rank() != 2 || row.rank() != 1 || row.extent(0) != x.extent(1)) {
    throw std::invalid_argument("add_rowvec: need [n,m] + [m], got " + shape_str(x.shape()) +
                                " + " + shape_str(row.shape()));
  }
  const std::int64_t n = x.extent(0), m = x.extent(1);
  Tensor out({n, m});
  const auto& kt = kernels::active();
  for (std::int64_t i = 0; i < n; ++i) {
    kt.add(x.data() + i * m, row.data(), out.data() + i * m, m);
  }
  Graph* g = result_graph({&x, &row});
  if (!g) return out;
  const int xn = x.node(), rn = row.node();
  return g->attach(std::move(out), [xn, rn, n, m](Graph& gr, const std::vector<double>& gout) {
    const auto& k2 = kernels::active();
    if (xn >= 0) k2.axpy(1.0, gout.data(), gr.grad(xn).data(), n * m);
    if (rn >= 0) {
      auto& grow = gr.grad(rn);
      for (std::int64_t i = 0; i < n; ++i) k2.axpy(1.0, gout.data() + i * m, grow.data(), m);
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_equal_shape(a, b, "sub");
  const std::int64_t n = a.size();
  Tensor out(a.shape());
  kernels::active().sub(a.data(), b.data(), out.data(), n);
  Graph* g = result_graph({&a, &b});
  if (!g) return out;
  const int an = a.node(), bn = b.node();
  return g->attach(std::move(out), [an, bn, n](Graph& gr, const std::vector<double>& gout) {
    const auto& kt = kernels::active();
    if (an >= 0) kt.axpy(1.0, gout.data(), gr.grad(an).data(), n);
    if (bn >= 0) kt.axpy(-1.0, gout.data(), gr.grad(bn).data(), n);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.size() == 1 && b.size() != 1) return mul(b, a.item());
  if (b.size() == 1 && a.size() != 1) return mul(a, b.item());
  require_equal_shape(a, b, "mul");
  const std::int64_t n = a.size();
  Tensor out(a.shape());
  kernels::active().mul(a.data(), b.data(), out.data(), n);
  Graph* g = result_graph({&a, &b});
  if (!g) return out;
  const int an = a.node(), bn = b.node();
  return g->attach(std::move(out), [a, b, an, bn, n](Graph& gr, const std::vector<double>& gout) {
    if (an >= 0) {
      auto& ga = gr.grad(an);
      for (std::int64_t i = 0; i < n; ++i) ga[i] += gout[i] * b[i];
    }
    if (bn >= 0) {
      auto& gb = gr.grad(bn);
      for (std::int64_t i = 0; i < n; ++i) gb[i] += gout[i] * a[i];
    }
  });
}

Tensor mul(const Tensor& a, double s) {
  const std::int64_t n = a.size();
  Tensor out(a.shape());
  kernels::active().scale(a.data(), s, out.data(), n);
  Graph* g = result_graph({&a});
  if (!g) return out;
  const int an = a.node();
  return g->attach(std::move(out), [an, s, n](Graph& gr, const std::vector<double>& gout) {
    kernels::active().axpy(s, gout.data(), gr.grad(an).data(), n);
  });
}

Tensor square(const Tensor& a) {
  const std::int64_t n = a.size();
  Tensor out(a.shape());
  kernels::active().mul(a.data(), a.data(), out.data(), n);
  Graph* g = result_graph({&a});
  if (!g) return out;
  const int an = a.node();
  return g->attach(std::move(out), [a, an, n](Graph& gr, const std::vector<double>& gout) {
    auto& ga = gr.grad(an);
    for (std::int64_t i = 0; i < n; ++i) ga[i] += 2.0 * a[i] * gout[i];
  });
}

Tensor relu(const Tensor& a) {
  const std::int64_t n = a.size();
  Tensor out(a.shape());
  kernels::active().relu(a.data(), out.data(), n);
  Graph* g = result_graph({&a});
  if (!g) return out;
  const int an = a.node();
  return g->attach(std::move(out), [a, an, n](Graph& gr, const std::vector<double>& gout) {
    kernels::active().relu_grad(a.data(), gout.data(), gr.grad(an).data(), n);
  });
}

Tensor tanh(const Tensor& a) {
  const std::int64_t n = a.size();
  Tensor out(a.shape());
  for (std::int64_t i = 0; i < n; ++i) out[i] = std::tanh(a[i]);
  Graph* g = result_graph({&a});
  if (!g) return out;
  const int an = a.node();
  // Backward uses the stored output: d tanh = 1 - y^2.
  return g->attach(std::move(out), [y = out, an, n](Graph& gr, const std::vector<double>& gout) {
    kernels::active().tanh_grad(y.data(), gout.data(), gr.grad(an).data(), n);
  });
}

Tensor sum(const Tensor& a) {
  const std::int64_t n = a.size();
  Tensor out = Tensor::scalar(kernels::active().sum(a.data(), n));
  Graph* g = result_graph({&a});
  if (!g) return out;
  const int an = a.node();
  return g->attach(std::move(out), [an, n](Graph& gr, const std::vector<double>& gout) {
    auto& ga = gr.grad(an);
    const double g0 = gout[0];
    for (std::int64_t i = 0; i < n; ++i) ga[i] += g0;
  });
}

Tensor mean(const Tensor& a) {
  const std::int64_t n = a.size();
  Tensor out = Tensor::scalar(kernels::active().sum(a.data(), n) / static_cast<double>(n));
  Graph* g = result_graph({&a});
  if (!g) return out;
  const int an = a.node();
  return g->attach(std::move(out), [an, n](Graph& gr, const std::vector<double>& gout) {
    auto& ga = gr.grad(an);
    const double g0 = gout[0] / static_cast<double>(n);
    for (std::int64_t i = 0; i < n; ++i) ga[i] += g0;
  });
}

Tensor abs_sum(const Tensor& a) {
  const std::int64_t n = a.size();
  Tensor out = Tensor::scalar(kernels::active().abs_sum(a.data(), n));
  Graph* g = result_graph({&a});
  if (!g) return out;
  const int an = a.node();
  return g->attach(std::move(out), [a, an, n](Graph& gr, const std::vector<double>& gout) {
    kernels::active().sign_axpy(gout[0], a.data(), gr.grad(an).data(), n);
  });
}

Tensor mse(const Tensor& a, const Tensor& target) {
  require_equal_shape(a, target, "mse");
  const std::int64_t n = a.size();
  Tensor out = Tensor::scalar(kernels::active().sq_diff_sum(a.data(), target.data(), n) /
                              static_cast<double>(n));
  Graph* g = result_graph({&a});
  if (!g) return out;
  const int an = a.node();
  return g->attach(std::move(out), [a, t = target.detached(), an, n](Graph& gr,
                                                                     const std::vector<double>& gout) {
    auto& ga = gr.grad(an);
    const double c = 2.0 * gout[0] / static_cast<double>(n);
    for (std::int64_t i = 0; i < n; ++i) ga[i] += c * (a[i] - t[i]);
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  check_shape(shape);
  if (shape_size(shape) != a.size()) {
    throw std::invalid_argument("reshape: size mismatch, " + shape_str(a.shape()) + " -> " +
                                shape_str(shape));
  }
  // Same buffer and same tape node; only the shape changes.
  Tensor out = a;
  out.shape_ = std::move(shape);
  return out;
}

double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                  std::vector<Tensor> params, double step) {
  if (step <= 0.0) throw std::invalid_argument("grad_check: step must be positive");

  Graph g;
  std::vector<Tensor> tracked;
  tracked.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    tracked.push_back(g.leaf(params[i], "p" + std::to_string(i)));
  }
  Tensor loss = f(tracked);
  if (!std::isfinite(loss.item())) throw std::runtime_error("grad_check: non-finite value");
  Gradients grads = g.backward(loss);

  auto eval = [&]() {
    const double v = f(params).item();
    if (!std::isfinite(v)) throw std::runtime_error("grad_check: non-finite value");
    return v;
  };

  double max_rel = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& gp = grads.at("p" + std::to_string(i));
    Tensor& p = params[i];
    for (std::int64_t j = 0; j < p.size(); ++j) {
      const double orig = p[j];
      p[j] = orig + step;
      const double fp = eval();
      p[j] = orig - step;
      const double fm = eval();
      p[j] = orig;
      const double fd = (fp - fm) / (2.0 * step);
      const double rel = std::fabs(gp[j] - fd) / (std::fabs(fd) + 1e-12);
      if (rel > max_rel) max_rel = rel;
    }
  }
  return max_rel;
}

}  // namespace sdeop
