#include "lpcc/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lpcc/error.hpp"

namespace lpcc::nn {

namespace {

void check_same_size(const Tensor& a, const Tensor& b, const char* op) {
  require(a.size() == b.size(), ErrorKind::invalid_argument,
          std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
}

Tensor like(const Tensor& t) { return Tensor(t.shape(), 0.0); }

}  // namespace

Var Graph::input(Tensor value) {
  require(value.all_finite(), ErrorKind::numeric, "input tensor contains non-finite values");
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::param(Parameter& p) {
  Node n;
  n.external = &p.value;
  n.needs_grad = record_ && p.trainable;
  n.param = n.needs_grad ? &p : nullptr;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::param(const Parameter& p) {
  Node n;
  n.external = &p.value;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tensor& Graph::value(Var v) const {
  require(v.valid() && v.id < nodes_.size(), ErrorKind::usage, "invalid graph variable");
  const auto& n = nodes_[v.id];
  return n.external ? *n.external : n.value;
}

Tensor& Graph::grad(Var v) {
  auto& n = nodes_[v.id];
  if (!n.has_grad) {
    n.grad = like(value(v));
    n.has_grad = true;
  }
  return n.grad;
}

void Graph::accumulate(Var v, const Tensor& g) {
  auto& n = nodes_[v.id];
  if (!n.needs_grad) return;
  check_same_size(value(v), g, "accumulate");
  if (!n.has_grad) {
    n.grad = Tensor::from(value(v).shape(), {g.values().begin(), g.values().end()});
    n.has_grad = true;
    return;
  }
  double* dst = n.grad.data();
  const double* src = g.data();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += src[i];
}

Var Graph::push(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn, const char* op) {
  return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn), op);
}

Var Graph::push(Tensor value, std::span<const Var> inputs, BackwardFn fn, const char* op) {
  require(value.all_finite(), ErrorKind::numeric, std::string(op) + " produced a non-finite value");
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (auto in : inputs)
      if (in.valid() && nodes_[in.id].needs_grad) n.needs_grad = true;
    if (n.needs_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Graph::backward(Var loss) {
  require(record_, ErrorKind::usage, "backward on a graph that did not record");
  require(loss.valid() && loss.id < nodes_.size(), ErrorKind::usage, "backward from an invalid variable");
  require(value(loss).size() == 1, ErrorKind::usage, "backward needs a scalar loss");
  require(nodes_[loss.id].needs_grad, ErrorKind::usage, "loss does not depend on any trainable parameter");
  grad(loss).fill(1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.has_grad) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param) {
      auto& pg = n.param->grad;
      if (pg.size() != n.grad.size()) pg = like(n.param->value);
      for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
    }
  }
}

Var affine(Graph& g, Var x, Var w, Var b) {
  const Tensor& X = g.value(x);
  const Tensor& W = g.value(w);
  const Tensor* B = b.valid() ? &g.value(b) : nullptr;
  Tensor y = kernels::affine(X, W, B);
  return g.push(std::move(y), {x, w, b},
                [x, w, b](Graph& gr, const Tensor& dy) {
                  const Tensor& X = gr.value(x);
                  const Tensor& W = gr.value(w);
                  if (gr.needs_grad(x)) gr.accumulate(x, kernels::matmul_nt(dy, W));
                  if (gr.needs_grad(w)) {
                    Tensor xm = Tensor::from({X.rows(), X.cols()}, {X.values().begin(), X.values().end()});
                    gr.accumulate(w, kernels::matmul_tn(xm, dy));
                  }
                  if (b.valid() && gr.needs_grad(b)) {
                    Tensor& gb = gr.grad(b);
                    const auto out = dy.cols();
                    for (std::size_t r = 0; r < dy.rows(); ++r)
                      for (std::size_t j = 0; j < out; ++j) gb[j] += dy(r, j);
                  }
                },
                "affine");
}

Var matmul(Graph& g, Var a, Var b) { return affine(g, a, b, Var{}); }

Var matmul_nt(Graph& g, Var a, Var b) {
  Tensor y = kernels::matmul_nt(g.value(a), g.value(b));
  return g.push(std::move(y), {a, b},
                [a, b](Graph& gr, const Tensor& dy) {
                  if (gr.needs_grad(a)) gr.accumulate(a, kernels::matmul(dy, gr.value(b)));
                  if (gr.needs_grad(b)) gr.accumulate(b, kernels::matmul_tn(dy, gr.value(a)));
                },
                "matmul_nt");
}

Var add(Graph& g, Var a, Var b) {
  const Tensor& A = g.value(a);
  const Tensor& B = g.value(b);
  check_same_size(A, B, "add");
  Tensor y = A;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += B[i];
  return g.push(std::move(y), {a, b},
                [a, b](Graph& gr, const Tensor& dy) {
                  gr.accumulate(a, dy);
                  gr.accumulate(b, dy);
                },
                "add");
}

Var sub(Graph& g, Var a, Var b) {
  const Tensor& A = g.value(a);
  const Tensor& B = g.value(b);
  check_same_size(A, B, "sub");
  Tensor y = A;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= B[i];
  return g.push(std::move(y), {a, b},
                [a, b](Graph& gr, const Tensor& dy) {
                  gr.accumulate(a, dy);
                  if (gr.needs_grad(b)) {
                    Tensor& gb = gr.grad(b);
                    for (std::size_t i = 0; i < dy.size(); ++i) gb[i] -= dy[i];
                  }
                },
                "sub");
}

Var mul(Graph& g, Var a, Var b) {
  const Tensor& A = g.value(a);
  const Tensor& B = g.value(b);
  check_same_size(A, B, "mul");
  Tensor y = A;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= B[i];
  return g.push(std::move(y), {a, b},
                [a, b](Graph& gr, const Tensor& dy) {
                  const Tensor& A = gr.value(a);
                  const Tensor& B = gr.value(b);
                  if (gr.needs_grad(a)) {
                    Tensor& ga = gr.grad(a);
                    for (std::size_t i = 0; i < dy.size(); ++i) ga[i] += dy[i] * B[i];
                  }
                  if (gr.needs_grad(b)) {
                    Tensor& gb = gr.grad(b);
                    for (std::size_t i = 0; i < dy.size(); ++i) gb[i] += dy[i] * A[i];
                  }
                },
                "mul");
}

Var scale(Graph& g, Var x, double c) {
  Tensor y = g.value(x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= c;
  return g.push(std::move(y), {x},
                [x, c](Graph& gr, const Tensor& dy) {
                  Tensor& gx = gr.grad(x);
                  for (std::size_t i = 0; i < dy.size(); ++i) gx[i] += dy[i] * c;
                },
                "scale");
}

Var scale_shift(Graph& g, Var x, Var gamma, Var beta) {
  const Tensor& X = g.value(x);
  const Tensor& G = g.value(gamma);
  const auto d = X.cols();
  require(G.size() == d, ErrorKind::invalid_argument, "scale_shift: gamma size mismatch");
  const Tensor* B = beta.valid() ? &g.value(beta) : nullptr;
  require(!B || B->size() == d, ErrorKind::invalid_argument, "scale_shift: beta size mismatch");
  Tensor y = like(X);
  for (std::size_t r = 0; r < X.rows(); ++r)
    for (std::size_t c = 0; c < d; ++c) y(r, c) = X(r, c) * G[c] + (B ? (*B)[c] : 0.0);
  return g.push(std::move(y), {x, gamma, beta},
                [x, gamma, beta](Graph& gr, const Tensor& dy) {
                  const Tensor& X = gr.value(x);
                  const Tensor& G = gr.value(gamma);
                  const auto d = X.cols();
                  if (gr.needs_grad(x)) {
                    Tensor& gx = gr.grad(x);
                    for (std::size_t r = 0; r < X.rows(); ++r)
                      for (std::size_t c = 0; c < d; ++c) gx(r, c) += dy(r, c) * G[c];
                  }
                  if (gr.needs_grad(gamma)) {
                    Tensor& gg = gr.grad(gamma);
                    for (std::size_t r = 0; r < X.rows(); ++r)
                      for (std::size_t c = 0; c < d; ++c) gg[c] += dy(r, c) * X(r, c);
                  }
                  if (beta.valid() && gr.needs_grad(beta)) {
                    Tensor& gb = gr.grad(beta);
                    for (std::size_t r = 0; r < X.rows(); ++r)
                      for (std::size_t c = 0; c < d; ++c) gb[c] += dy(r, c);
                  }
                },
                "scale_shift");
}

Var silu(Graph& g, Var x) {
  const Tensor& X = g.value(x);
  Tensor y = like(X);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = kernels::silu(X[i]);
  return g.push(std::move(y), {x},
                [x](Graph& gr, const Tensor& dy) {
                  const Tensor& X = gr.value(x);
                  Tensor& gx = gr.grad(x);
                  for (std::size_t i = 0; i < dy.size(); ++i) {
                    const double s = kernels::sigmoid(X[i]);
                    gx[i] += dy[i] * (s + X[i] * s * (1.0 - s));
                  }
                },
                "silu");
}

Var sigmoid(Graph& g, Var x) {
  const Tensor& X = g.value(x);
  Tensor y = like(X);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = kernels::sigmoid(X[i]);
  const auto out = Var{static_cast<std::uint32_t>(g.size())};
  return g.push(std::move(y), {x},
                [x, out](Graph& gr, const Tensor& dy) {
                  const Tensor& Y = gr.value(out);
                  Tensor& gx = gr.grad(x);
                  for (std::size_t i = 0; i < dy.size(); ++i) gx[i] += dy[i] * Y[i] * (1.0 - Y[i]);
                },
                "sigmoid");
}

Var layer_norm(Graph& g, Var x) {
  const Tensor& X = g.value(x);
  const auto d = X.cols();
  Tensor y = like(X);
  for (std::size_t r = 0; r < X.rows(); ++r)
    kernels::layer_norm_row(X.data() + r * d, d, kLayerNormEps, y.data() + r * d);
  const auto out = Var{static_cast<std::uint32_t>(g.size())};
  return g.push(std::move(y), {x},
                [x, out](Graph& gr, const Tensor& dy) {
                  const Tensor& X = gr.value(x);
                  const Tensor& Y = gr.value(out);
                  Tensor& gx = gr.grad(x);
                  const auto d = X.cols();
                  const double nd = static_cast<double>(d);
                  for (std::size_t r = 0; r < X.rows(); ++r) {
                    const double* xr = X.data() + r * d;
                    double mean = 0.0;
                    for (std::size_t c = 0; c < d; ++c) mean += xr[c];
                    mean /= nd;
                    double var = 0.0;
                    for (std::size_t c = 0; c < d; ++c) var += (xr[c] - mean) * (xr[c] - mean);
                    var /= nd;
                    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
                    double mdy = 0.0;
                    double mdyy = 0.0;
                    for (std::size_t c = 0; c < d; ++c) {
                      mdy += dy(r, c);
                      mdyy += dy(r, c) * Y(r, c);
                    }
                    mdy /= nd;
                    mdyy /= nd;
                    for (std::size_t c = 0; c < d; ++c)
                      gx(r, c) += inv * (dy(r, c) - mdy - Y(r, c) * mdyy);
                  }
                },
                "layer_norm");
}

Var softmax(Graph& g, Var x) {
  const Tensor& X = g.value(x);
  const auto d = X.cols();
  Tensor y = like(X);
  for (std::size_t r = 0; r < X.rows(); ++r) kernels::softmax_row(X.data() + r * d, d, y.data() + r * d);
  const auto out = Var{static_cast<std::uint32_t>(g.size())};
  return g.push(std::move(y), {x},
                [x, out](Graph& gr, const Tensor& dy) {
                  const Tensor& Y = gr.value(out);
                  Tensor& gx = gr.grad(x);
                  const auto d = Y.cols();
                  for (std::size_t r = 0; r < Y.rows(); ++r) {
                    double dot = 0.0;
                    for (std::size_t c = 0; c < d; ++c) dot += dy(r, c) * Y(r, c);
                    for (std::size_t c = 0; c < d; ++c) gx(r, c) += Y(r, c) * (dy(r, c) - dot);
                  }
                },
                "softmax");
}

Var log_softmax(Graph& g, Var x) {
  const Tensor& X = g.value(x);
  const auto d = X.cols();
  Tensor y = like(X);
  for (std::size_t r = 0; r < X.rows(); ++r)
    kernels::log_softmax_row(X.data() + r * d, d, y.data() + r * d);
  const auto out = Var{static_cast<std::uint32_t>(g.size())};
  return g.push(std::move(y), {x},
                [x, out](Graph& gr, const Tensor& dy) {
                  const Tensor& Y = gr.value(out);
                  Tensor& gx = gr.grad(x);
                  const auto d = Y.cols();
                  for (std::size_t r = 0; r < Y.rows(); ++r) {
                    double total = 0.0;
                    for (std::size_t c = 0; c < d; ++c) total += dy(r, c);
                    for (std::size_t c = 0; c < d; ++c) gx(r, c) += dy(r, c) - std::exp(Y(r, c)) * total;
                  }
                },
                "log_softmax");
}

namespace {

void check_indices(std::span<const int> indices, std::size_t rows, const char* op) {
  for (int i : indices)
    require(i < static_cast<int>(rows), ErrorKind::out_of_range,
            std::string(op) + ": index " + std::to_string(i) + " outside table of " + std::to_string(rows) + " rows");
}

}  // namespace

Var embed(Graph& g, Var table, std::span<const int> indices) {
  const Tensor& T = g.value(table);
  check_indices(indices, T.rows(), "embed");
  const auto d = T.cols();
  Tensor y = Tensor::matrix(indices.size(), d);
  for (std::size_t r = 0; r < indices.size(); ++r)
    if (indices[r] >= 0) std::copy_n(T.data() + static_cast<std::size_t>(indices[r]) * d, d, y.data() + r * d);
  std::vector<int> idx(indices.begin(), indices.end());
  return g.push(std::move(y), {table},
                [table, idx = std::move(idx)](Graph& gr, const Tensor& dy) {
                  Tensor& gt = gr.grad(table);
                  const auto d = gt.cols();
                  for (std::size_t r = 0; r < idx.size(); ++r) {
                    if (idx[r] < 0) continue;
                    double* dst = gt.data() + static_cast<std::size_t>(idx[r]) * d;
                    for (std::size_t c = 0; c < d; ++c) dst[c] += dy(r, c);
                  }
                },
                "embed");
}

Var embed_add(Graph& g, Var x, Var table, std::span<const int> indices) {
  const Tensor& X = g.value(x);
  const Tensor& T = g.value(table);
  check_indices(indices, T.rows(), "embed_add");
  require(X.rows() == indices.size() && X.cols() == T.cols(), ErrorKind::invalid_argument,
          "embed_add: shape mismatch");
  const auto d = T.cols();
  Tensor y = X;
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] < 0) continue;
    const double* src = T.data() + static_cast<std::size_t>(indices[r]) * d;
    for (std::size_t c = 0; c < d; ++c) y(r, c) += src[c];
  }
  std::vector<int> idx(indices.begin(), indices.end());
  return g.push(std::move(y), {x, table},
                [x, table, idx = std::move(idx)](Graph& gr, const Tensor& dy) {
                  gr.accumulate(x, dy);
                  if (!gr.needs_grad(table)) return;
                  Tensor& gt = gr.grad(table);
                  const auto d = gt.cols();
                  for (std::size_t r = 0; r < idx.size(); ++r) {
                    if (idx[r] < 0) continue;
                    double* dst = gt.data() + static_cast<std::size_t>(idx[r]) * d;
                    for (std::size_t c = 0; c < d; ++c) dst[c] += dy(r, c);
                  }
                },
                "embed_add");
}

Var gather_rows(Graph& g, Var x, std::span<const std::uint32_t> rows) {
  const Tensor& X = g.value(x);
  const auto d = X.cols();
  Tensor y = Tensor::matrix(rows.size(), d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r] < X.rows(), ErrorKind::out_of_range, "gather_rows: row index out of range");
    std::copy_n(X.data() + rows[r] * d, d, y.data() + r * d);
  }
  std::vector<std::uint32_t> idx(rows.begin(), rows.end());
  return g.push(std::move(y), {x},
                [x, idx = std::move(idx)](Graph& gr, const Tensor& dy) {
                  Tensor& gx = gr.grad(x);
                  const auto d = gx.cols();
                  for (std::size_t r = 0; r < idx.size(); ++r) {
                    double* dst = gx.data() + idx[r] * d;
                    for (std::size_t c = 0; c < d; ++c) dst[c] += dy(r, c);
                  }
                },
                "gather_rows");
}

Var concat_cols(Graph& g, std::span<const Var> parts) {
  require(!parts.empty(), ErrorKind::invalid_argument, "concat_cols: no inputs");
  const auto n = g.value(parts[0]).rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (auto p : parts) {
    const Tensor& t = g.value(p);
    require(t.rows() == n, ErrorKind::invalid_argument, "concat_cols: row count mismatch");
    widths.push_back(t.cols());
    total += t.cols();
  }
  Tensor y = Tensor::matrix(n, total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& t = g.value(parts[k]);
    for (std::size_t r = 0; r < n; ++r) std::copy_n(t.data() + r * widths[k], widths[k], y.data() + r * total + off);
    off += widths[k];
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return g.push(std::move(y), parts,
                [ins, widths](Graph& gr, const Tensor& dy) {
                  const auto total = dy.cols();
                  std::size_t off = 0;
                  for (std::size_t k = 0; k < ins.size(); ++k) {
                    if (gr.needs_grad(ins[k])) {
                      Tensor& gp = gr.grad(ins[k]);
                      for (std::size_t r = 0; r < dy.rows(); ++r)
                        for (std::size_t c = 0; c < widths[k]; ++c) gp[r * widths[k] + c] += dy[r * total + off + c];
                    }
                    off += widths[k];
                  }
                },
                "concat_cols");
}

Var slice_cols(Graph& g, Var x, std::size_t begin, std::size_t count) {
  const Tensor& X = g.value(x);
  const auto d = X.cols();
  require(begin + count <= d, ErrorKind::out_of_range, "slice_cols: range outside the tensor");
  Tensor y = Tensor::matrix(X.rows(), count);
  for (std::size_t r = 0; r < X.rows(); ++r) std::copy_n(X.data() + r * d + begin, count, y.data() + r * count);
  return g.push(std::move(y), {x},
                [x, begin, count](Graph& gr, const Tensor& dy) {
                  Tensor& gx = gr.grad(x);
                  const auto d = gx.cols();
                  for (std::size_t r = 0; r < dy.rows(); ++r)
                    for (std::size_t c = 0; c < count; ++c) gx[r * d + begin + c] += dy(r, c);
                },
                "slice_cols");
}

Var neighbor_max(Graph& g, Var x, std::span<const std::vector<std::uint32_t>> lists) {
  const Tensor& X = g.value(x);
  const auto d = X.cols();
  Tensor y = Tensor::matrix(lists.size(), d);
  std::vector<std::uint32_t> arg(lists.size() * d);
  for (std::size_t i = 0; i < lists.size(); ++i) {
    const auto& nb = lists[i];
    require(!nb.empty(), ErrorKind::invalid_argument, "neighbor_max: empty neighborhood");
    for (auto j : nb) require(j < X.rows(), ErrorKind::out_of_range, "neighbor_max: neighbor index out of range");
    for (std::size_t c = 0; c < d; ++c) {
      std::uint32_t best = nb[0];
      double v = X(best, c);
      for (std::size_t k = 1; k < nb.size(); ++k) {
        const double cand = X(nb[k], c);
        if (cand > v) {
          v = cand;
          best = nb[k];
        }
      }
      y(i, c) = v;
      arg[i * d + c] = best;
    }
  }
  return g.push(std::move(y), {x},
                [x, arg = std::move(arg)](Graph& gr, const Tensor& dy) {
                  Tensor& gx = gr.grad(x);
                  const auto d = gx.cols();
                  for (std::size_t i = 0; i < dy.rows(); ++i)
                    for (std::size_t c = 0; c < d; ++c) gx(arg[i * d + c], c) += dy(i, c);
                },
                "neighbor_max");
}

void diag_scan_step(const double* a, const double* b, const double* f, std::size_t d, double* h) {
  for (std::size_t c = 0; c < d; ++c) h[c] = a[c] * h[c] + b[c] * f[c];
}

Var diag_scan(Graph& g, Var a, Var b, Var f) {
  const Tensor& A = g.value(a);
  const Tensor& B = g.value(b);
  const Tensor& F = g.value(f);
  check_same_size(A, B, "diag_scan");
  check_same_size(A, F, "diag_scan");
  const auto n = F.rows();
  const auto d = F.cols();
  Tensor y = Tensor::matrix(n, d);
  std::vector<double> h(d, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    diag_scan_step(A.data() + t * d, B.data() + t * d, F.data() + t * d, d, h.data());
    std::copy(h.begin(), h.end(), y.data() + t * d);
  }
  const auto out = Var{static_cast<std::uint32_t>(g.size())};
  return g.push(std::move(y), {a, b, f},
                [a, b, f, out](Graph& gr, const Tensor& dy) {
                  const Tensor& A = gr.value(a);
                  const Tensor& B = gr.value(b);
                  const Tensor& F = gr.value(f);
                  const Tensor& H = gr.value(out);
                  const auto n = F.rows();
                  const auto d = F.cols();
                  Tensor* ga = gr.needs_grad(a) ? &gr.grad(a) : nullptr;
                  Tensor* gb = gr.needs_grad(b) ? &gr.grad(b) : nullptr;
                  Tensor* gf = gr.needs_grad(f) ? &gr.grad(f) : nullptr;
                  std::vector<double> carry(d, 0.0);
                  for (std::size_t t = n; t-- > 0;) {
                    for (std::size_t c = 0; c < d; ++c) {
                      const double gh = dy(t, c) + carry[c];
                      const double hprev = t == 0 ? 0.0 : H(t - 1, c);
                      if (ga) (*ga)(t, c) += gh * hprev;
                      if (gb) (*gb)(t, c) += gh * F(t, c);
                      if (gf) (*gf)(t, c) += gh * B(t, c);
                      carry[c] = gh * A(t, c);
                    }
                  }
                },
                "diag_scan");
}

Var pick(Graph& g, Var x, std::span<const int> cols) {
  const Tensor& X = g.value(x);
  require(cols.size() == X.rows(), ErrorKind::invalid_argument, "pick: one column per row required");
  Tensor y = Tensor::matrix(X.rows(), 1);
  for (std::size_t r = 0; r < cols.size(); ++r) {
    require(cols[r] >= 0 && static_cast<std::size_t>(cols[r]) < X.cols(), ErrorKind::out_of_range,
            "pick: column out of range");
    y[r] = X(r, static_cast<std::size_t>(cols[r]));
  }
  std::vector<int> idx(cols.begin(), cols.end());
  return g.push(std::move(y), {x},
                [x, idx = std::move(idx)](Graph& gr, const Tensor& dy) {
                  Tensor& gx = gr.grad(x);
                  for (std::size_t r = 0; r < idx.size(); ++r) gx(r, static_cast<std::size_t>(idx[r])) += dy[r];
                },
                "pick");
}

Var sum(Graph& g, Var x) {
  const Tensor& X = g.value(x);
  double s = 0.0;
  for (double v : X.values()) s += v;
  return g.push(Tensor::from({1}, {s}), {x},
                [x](Graph& gr, const Tensor& dy) {
                  Tensor& gx = gr.grad(x);
                  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += dy[0];
                },
                "sum");
}

Var mean(Graph& g, Var x) {
  const Tensor& X = g.value(x);
  require(X.size() > 0, ErrorKind::invalid_argument, "mean of an empty tensor");
  double s = 0.0;
  for (double v : X.values()) s += v;
  const double n = static_cast<double>(X.size());
  return g.push(Tensor::from({1}, {s / n}), {x},
                [x, n](Graph& gr, const Tensor& dy) {
                  Tensor& gx = gr.grad(x);
                  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += dy[0] / n;
                },
                "mean");
}

}  // namespace lpcc::nn
