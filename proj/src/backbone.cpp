#include "lpcc/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lpcc/error.hpp"

namespace lpcc {

std::vector<std::vector<std::uint32_t>> knn_graph(std::span<const NodeContext> nodes, std::size_t k) {
  require(k >= 1, ErrorKind::invalid_argument, "k-NN needs k >= 1");
  const std::size_t n = nodes.size();
  const std::size_t keff = std::min(k, n);
  std::vector<std::vector<std::uint32_t>> out(n);
  std::vector<std::pair<double, std::uint32_t>> cand(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ci = nodes[i].coords;
    for (std::size_t j = 0; j < n; ++j) {
      const auto& cj = nodes[j].coords;
      const double dx = ci[0] - cj[0];
      const double dy = ci[1] - cj[1];
      const double dz = ci[2] - cj[2];
      cand[j] = {dx * dx + dy * dy + dz * dz, static_cast<std::uint32_t>(j)};
    }
    // pair ordering: distance first, then index
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keff), cand.end());
    out[i].reserve(keff);
    for (std::size_t t = 0; t < keff; ++t) out[i].push_back(cand[t].second);
  }
  return out;
}

nn::Var tokenize(ParamBinder& bind, std::span<const NodeContext> nodes) {
  auto& g = bind.graph();
  const auto& cfg = bind.model().config();
  const auto& w = bind.model().backbone;
  const std::size_t n = nodes.size();
  require(n > 0, ErrorKind::invalid_argument, "empty window");
  const auto generations = static_cast<std::size_t>(cfg.generations);

  std::vector<nn::Var> parts;
  std::vector<int> idx(n);
  for (std::size_t gen = 0; gen < generations; ++gen) {
    for (std::size_t i = 0; i < n; ++i) {
      require(nodes[i].ancestors.size() == generations, ErrorKind::invalid_argument,
              "node context has the wrong number of ancestor generations");
      idx[i] = nodes[i].ancestors[gen];
    }
    parts.push_back(nn::embed(g, bind(w.ancestor_table), idx));
  }
  for (std::size_t i = 0; i < n; ++i) {
    require(nodes[i].octant < 8, ErrorKind::out_of_range, "octant outside [0, 7]");
    idx[i] = nodes[i].octant;
  }
  parts.push_back(nn::embed(g, bind(w.octant_table), idx));
  for (std::size_t i = 0; i < n; ++i) {
    require(nodes[i].level >= 1 && nodes[i].level <= cfg.max_level, ErrorKind::out_of_range,
            "level " + std::to_string(nodes[i].level) + " outside the model's level table");
    idx[i] = nodes[i].level - 1;
  }
  parts.push_back(nn::embed(g, bind(w.level_table), idx));
  return nn::concat_cols(g, parts);
}

nn::Var positional_encoding(ParamBinder& bind, nn::Var tokens, std::span<const NodeContext> nodes,
                            std::span<const int> causal) {
  auto& g = bind.graph();
  const auto& cfg = bind.model().config();
  const auto& w = bind.model().backbone;
  const std::size_t n = nodes.size();

  nn::Tensor coords = nn::Tensor::matrix(n, 3);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < 3; ++a) coords(i, a) = nodes[i].coords[a];
  nn::Var c = g.input(std::move(coords));
  nn::Var e1 = nn::add(g, apply(bind, w.token_mlp, tokens), apply(bind, w.coord_mlp, c));
  if (!causal.empty()) {
    require(causal.size() == n, ErrorKind::invalid_argument, "causal channel length mismatch");
    e1 = nn::embed_add(g, e1, bind(w.causal_table), causal);
  }

  const auto lists = knn_graph(nodes, static_cast<std::size_t>(cfg.neighbors));
  const std::size_t keff = lists.empty() ? 0 : lists[0].size();
  std::vector<std::uint32_t> center(n * keff);
  std::vector<std::uint32_t> neighbor(n * keff);
  std::vector<std::vector<std::uint32_t>> groups(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < keff; ++t) {
      const auto e = static_cast<std::uint32_t>(i * keff + t);
      center[e] = static_cast<std::uint32_t>(i);
      neighbor[e] = lists[i][t];
      groups[i].push_back(e);
    }
  }

  // Linear(e'_i (+) (e'_j - e'_i)) split into a center term and a difference
  // term so the d x d products run per node instead of per edge.
  nn::Var u = apply(bind, w.edge_center, e1);
  nn::Var v = nn::matmul(g, e1, bind(w.edge_diff));
  nn::Var diff = nn::sub(g, nn::gather_rows(g, v, neighbor), nn::gather_rows(g, v, center));
  nn::Var e2 = nn::silu(g, nn::add(g, nn::gather_rows(g, u, center), diff));
  nn::Var gate = nn::silu(g, apply(bind, w.gate, e2));
  nn::Var msg = apply(bind, w.message, nn::mul(g, e2, gate));
  return nn::neighbor_max(g, msg, groups);
}

nn::Var attention_stack(ParamBinder& bind, nn::Var x) {
  auto& g = bind.graph();
  const auto& cfg = bind.model().config();
  const auto heads = static_cast<std::size_t>(cfg.heads);
  const auto dh = static_cast<std::size_t>(cfg.embed_dim) / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (const auto& layer : bind.model().backbone.layers) {
    nn::Var q = apply(bind, layer.q, x);
    nn::Var k = apply(bind, layer.k, x);
    nn::Var v = apply(bind, layer.v, x);
    std::vector<nn::Var> outs;
    for (std::size_t h = 0; h < heads; ++h) {
      nn::Var qh = nn::slice_cols(g, q, h * dh, dh);
      nn::Var kh = nn::slice_cols(g, k, h * dh, dh);
      nn::Var vh = nn::slice_cols(g, v, h * dh, dh);
      nn::Var att = nn::softmax(g, nn::scale(g, nn::matmul_nt(g, qh, kh), inv_sqrt));
      outs.push_back(nn::matmul(g, att, vh));
    }
    nn::Var mha = apply(bind, layer.o, heads == 1 ? outs[0] : nn::concat_cols(g, outs));
    x = nn::scale_shift(g, nn::layer_norm(g, nn::add(g, x, mha)), bind(layer.ln1_gamma), bind(layer.ln1_beta));
    nn::Var ffn = apply(bind, layer.ffn2, nn::silu(g, apply(bind, layer.ffn1, x)));
    x = nn::scale_shift(g, nn::layer_norm(g, nn::add(g, x, ffn)), bind(layer.ln2_gamma), bind(layer.ln2_beta));
  }
  return x;
}

nn::Var backbone_forward(ParamBinder& bind, std::span<const NodeContext> nodes, std::span<const int> causal,
                         InvocationCounters* counters) {
  if (counters) counters->backbone.fetch_add(1, std::memory_order_relaxed);
  nn::Var tokens = tokenize(bind, nodes);
  nn::Var pe = positional_encoding(bind, tokens, nodes, causal);
  return attention_stack(bind, pe);
}

nn::Tensor run_backbone(const Model& model, std::span<const NodeContext> nodes, std::span<const int> causal,
                        InvocationCounters* counters) {
  nn::Graph g(false);
  ParamBinder bind(g, model);
  const nn::Var out = backbone_forward(bind, nodes, causal, counters);
  return g.value(out);
}

}  // namespace lpcc
