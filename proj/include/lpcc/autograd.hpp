#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lpcc/tensor.hpp"

namespace lpcc::nn {

/// A learnable tensor with a stable checkpoint name.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
  bool decay = true;  // subject to decoupled weight decay

  Parameter() = default;
  Parameter(std::string n, Tensor v, bool apply_decay = true)
      : name(std::move(n)), value(std::move(v)), grad(value.shape(), 0.0), decay(apply_decay) {}

  void zero_grad() { grad.fill(0.0); }
};

struct Var {
  std::uint32_t id = std::numeric_limits<std::uint32_t>::max();
  bool valid() const { return id != std::numeric_limits<std::uint32_t>::max(); }
};

class Graph;
using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

/// Tape for reverse-mode differentiation. With `record = false` the same op
/// functions only evaluate values, which is how inference runs.
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }

  Var input(Tensor value);
  /// Leaf bound to `p`; the value is referenced, not copied. Gradients land in
  /// `p.grad` after backward().
  Var param(Parameter& p);
  Var param(const Parameter& p);

  const Tensor& value(Var v) const;
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
  /// Adds `g` into the gradient of `v` (allocating it on first use).
  void accumulate(Var v, const Tensor& g);
  /// Gradient buffer of `v`, allocated on first use.
  Tensor& grad(Var v);

  /// Reverse sweep from a scalar. Throws usage if nothing was recorded.
  void backward(Var loss);

  /// Registers an op result. `inputs` decide whether the node needs a gradient.
  Var push(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn, const char* op);
  Var push(Tensor value, std::span<const Var> inputs, BackwardFn fn, const char* op);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool needs_grad = false;
    bool has_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  bool record_;
  std::vector<Node> nodes_;
};

// ---- differentiable primitives -------------------------------------------

/// x (n x in) * w (in x out) + b (out); `b` may be an invalid Var.
Var affine(Graph& g, Var x, Var w, Var b = {});
Var matmul(Graph& g, Var a, Var b);
/// a * b^T
Var matmul_nt(Graph& g, Var a, Var b);
Var add(Graph& g, Var a, Var b);
Var sub(Graph& g, Var a, Var b);
Var mul(Graph& g, Var a, Var b);
Var scale(Graph& g, Var x, double c);
/// Column-wise x * gamma + beta.
Var scale_shift(Graph& g, Var x, Var gamma, Var beta);
Var silu(Graph& g, Var x);
Var sigmoid(Graph& g, Var x);
/// Row-wise normalization to zero mean and unit variance (no affine part).
Var layer_norm(Graph& g, Var x);
Var softmax(Graph& g, Var x);
Var log_softmax(Graph& g, Var x);
/// Rows of `table` selected by `indices`; a negative index yields a zero row.
Var embed(Graph& g, Var table, std::span<const int> indices);
/// x + table[indices]; rows with a negative index are copied unchanged.
Var embed_add(Graph& g, Var x, Var table, std::span<const int> indices);
Var gather_rows(Graph& g, Var x, std::span<const std::uint32_t> rows);
Var concat_cols(Graph& g, std::span<const Var> parts);
Var slice_cols(Graph& g, Var x, std::size_t begin, std::size_t count);
/// out[i] = channel-wise max over rows lists[i] of x.
Var neighbor_max(Graph& g, Var x, std::span<const std::vector<std::uint32_t>> lists);
/// h_t = a_t * h_{t-1} + b_t * f_t with h_0 = 0, elementwise per channel.
Var diag_scan(Graph& g, Var a, Var b, Var f);
/// y[i] = x[i, cols[i]] as an n x 1 column.
Var pick(Graph& g, Var x, std::span<const int> cols);
Var sum(Graph& g, Var x);
Var mean(Graph& g, Var x);

/// Sequential forward of diag_scan used by both the recorded op and tests.
void diag_scan_step(const double* a, const double* b, const double* f, std::size_t d,
                    double* h);

}  // namespace lpcc::nn
