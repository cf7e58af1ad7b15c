#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace sdeop {

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& s);
std::int64_t shape_size(const Shape& s);

class Graph;

// Dense row-major double tensor. Values live in a shared buffer so tracked
// views (graph leaves) and optimizer updates alias the same storage. A
// tensor is tracked when it carries a node id of some Graph.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor full(Shape shape, double v);

  const Shape& shape() const { return shape_; }
  std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t size() const;
  std::int64_t extent(std::int64_t d) const { return shape_[d]; }

  double* data() { return data_->data(); }
  const double* data() const { return data_->data(); }
  std::vector<double>& values() { return *data_; }
  const std::vector<double>& values() const { return *data_; }

  double& operator[](std::int64_t i) { return (*data_)[i]; }
  double operator[](std::int64_t i) const { return (*data_)[i]; }

  // Value of a 1-element tensor.
  double item() const;

  bool defined() const { return static_cast<bool>(data_); }
  bool tracked() const { return node_ >= 0; }
  int node() const { return node_; }
  Graph* graph() const { return graph_; }

  // Same buffer, no graph membership.
  Tensor detached() const;
  // Deep copy, untracked.
  Tensor clone() const;

  bool all_finite() const;

 private:
  friend class Graph;
  friend Tensor reshape(const Tensor&, Shape);
  Shape shape_;
  std::shared_ptr<std::vector<double>> data_;
  Graph* graph_ = nullptr;
  int node_ = -1;
};

// Gradient bundle produced by Graph::backward: one entry per registered leaf.
struct Gradients {
  std::map<std::string, Tensor> by_name;

  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return by_name.count(name) != 0; }
};

// Single-use reverse-mode tape. Nodes are appended in forward order; backward
// walks them once in reverse and the graph is then consumed.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Register a named parameter leaf. The returned tensor shares t's buffer.
  Tensor leaf(const Tensor& t, const std::string& name);

  // Reverse accumulation from a scalar loss. Throws on a non-scalar loss or
  // if the tape was already consumed.
  Gradients backward(const Tensor& loss);

  // Backward rule of one node: receives its own output gradient and
  // accumulates into parent gradients via grad().
  using BackwardFn = std::function<void(Graph&, const std::vector<double>& gout)>;

  // Register `out` as a new tape node with the given backward rule.
  Tensor attach(Tensor out, BackwardFn fn);

  // Gradient buffer of a node, zero-allocated on first access.
  std::vector<double>& grad(int node);
  bool has_grad(int node) const { return !grads_[node].empty(); }

  bool consumed() const { return consumed_; }
  std::size_t node_count() const { return nodes_.size(); }

  Tensor track(const Tensor& t);  // unnamed leaf (no gradient export)

 private:
  int add_node(std::int64_t out_size, BackwardFn fn);

  struct Node {
    std::int64_t size;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  std::vector<std::pair<std::string, Tensor>> leaves_;
  bool consumed_ = false;
};

// ---- forward/backward operations -------------------------------------------
// Each op computes eagerly; when an input is tracked the result joins the same
// graph with the matching backward rule.

Tensor matmul(const Tensor& a, const Tensor& b);
// a [n,p] x b [m,p] -> [n,m], i.e. a * b^T. Rows of both operands are
// contiguous, which keeps the inner products vectorizable.
Tensor matmul_nt(const Tensor& a, const Tensor& b);

// conv1d: input [C,L] or [N,C,L]; kernel [OC,IC,W]; valid (no padding).
Tensor conv1d(const Tensor& input, const Tensor& kernel, std::int64_t stride);
// conv2d: input [C,H,W] or [N,C,H,W]; kernel [OC,IC,KH,KW]; valid.
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::int64_t stride);

Tensor add(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double s);
// x [n,m] + row vector [m], broadcast over rows (bias add).
Tensor add_rowvec(const Tensor& x, const Tensor& row);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, double s);
Tensor square(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Sum of absolute values; backward is sign (0 at the origin).
Tensor abs_sum(const Tensor& a);
// Fused mean((a - target)^2); target is not differentiated.
Tensor mse(const Tensor& a, const Tensor& target);

// Metadata-only view: same buffer, same node, new shape of equal size.
Tensor reshape(const Tensor& a, Shape shape);

// Central-difference gradient check. `f` maps the (tracked) parameters to a
// scalar tensor; returns max over all parameter entries of
// |autodiff - fd| / (|fd| + 1e-12).
double grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                  std::vector<Tensor> params, double step);

}  // namespace sdeop
