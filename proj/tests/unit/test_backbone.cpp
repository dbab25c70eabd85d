#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "lpcc/backbone.hpp"
#include "lpcc/error.hpp"
#include "test_support.hpp"

using namespace lpcc;
using namespace lpcc::testing;

namespace {

std::vector<NodeContext> random_nodes(std::size_t n, int generations, std::mt19937_64& rng, int level = 5) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<NodeContext> out(n);
  for (auto& c : out) {
    c.level = level;
    c.octant = static_cast<std::uint8_t>(rng() % 8);
    c.ancestors.resize(static_cast<std::size_t>(generations));
    for (auto& a : c.ancestors) a = static_cast<std::uint8_t>(1 + rng() % 255);
    c.coords = {u(rng), u(rng), u(rng)};
  }
  return out;
}

// Exhaustive k-nearest with (distance, index) ordering.
std::vector<std::uint32_t> brute_knn(const std::vector<NodeContext>& nodes, std::size_t i, std::size_t k) {
  std::vector<std::uint32_t> idx(nodes.size());
  std::iota(idx.begin(), idx.end(), 0u);
  auto d2 = [&](std::uint32_t j) {
    double s = 0;
    for (int a = 0; a < 3; ++a) {
      const double d = nodes[i].coords[a] - nodes[j].coords[a];
      s += d * d;
    }
    return s;
  };
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return d2(a) < d2(b); });
  idx.resize(std::min(k, nodes.size()));
  return idx;
}

}  // namespace

TEST_CASE("token width follows the configuration and lookups are pure") {
  const auto cfg = tiny_config();
  const Model m(cfg, 3);
  std::mt19937_64 rng(1);
  auto nodes = random_nodes(4, cfg.generations, rng);
  nodes[2] = nodes[0];
  nn::Graph g(false);
  ParamBinder bind(g, m);
  const auto t = g.value(tokenize(bind, nodes));
  CHECK(t.cols() == static_cast<std::size_t>(cfg.token_dim()));
  CHECK(std::equal(t.row(0).begin(), t.row(0).end(), t.row(2).begin()));
}

TEST_CASE("root token is padding ancestors plus octant 0 and level 1") {
  const auto cfg = tiny_config();
  const Model m(cfg, 3);
  NodeContext root;
  root.ancestors.assign(static_cast<std::size_t>(cfg.generations), 0);
  nn::Graph g(false);
  ParamBinder bind(g, m);
  const auto t = g.value(tokenize(bind, std::vector<NodeContext>{root}));
  std::size_t col = 0;
  for (int gen = 0; gen < cfg.generations; ++gen)
    for (int j = 0; j < cfg.ancestor_embed; ++j) CHECK(t(0, col++) == m.backbone.ancestor_table.value(0, static_cast<std::size_t>(j)));
  for (int j = 0; j < cfg.octant_embed; ++j) CHECK(t(0, col++) == m.backbone.octant_table.value(0, static_cast<std::size_t>(j)));
  for (int j = 0; j < cfg.level_embed; ++j) CHECK(t(0, col++) == m.backbone.level_table.value(0, static_cast<std::size_t>(j)));
}

TEST_CASE("tokenize rejects out-of-range octant and level") {
  const auto cfg = tiny_config();
  const Model m(cfg, 3);
  std::mt19937_64 rng(2);
  auto nodes = random_nodes(2, cfg.generations, rng);
  nn::Graph g(false);
  ParamBinder bind(g, m);
  nodes[1].level = cfg.max_level + 1;
  CHECK_THROWS_AS(tokenize(bind, nodes), Error);
  nodes[1].level = 3;
  nodes[1].octant = 8;
  CHECK_THROWS_AS(tokenize(bind, nodes), Error);
}

TEST_CASE("k-NN graph matches exhaustive search, self first") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    auto nodes = random_nodes(1 + rng() % 40, 2, rng);
    const std::size_t k = 1 + rng() % 10;
    const auto lists = knn_graph(nodes, k);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      CHECK(lists[i] == brute_knn(nodes, i, k));
      CHECK(lists[i][0] == i);
    }
  }
}

TEST_CASE("k-NN ties go to the lower index") {
  std::vector<NodeContext> nodes(4);
  nodes[0].coords = {0, 0, 0};
  nodes[1].coords = {1, 0, 0};
  nodes[2].coords = {-1, 0, 0};
  nodes[3].coords = {0, 1, 0};
  const auto lists = knn_graph(nodes, 3);
  CHECK(lists[0] == std::vector<std::uint32_t>{0, 1, 2});
}

TEST_CASE("single-node window gives finite, repeatable features") {
  const auto cfg = tiny_config();
  const Model m(cfg, 3);
  std::mt19937_64 rng(5);
  const auto nodes = random_nodes(1, cfg.generations, rng);
  const auto a = run_backbone(m, nodes);
  CHECK(a.rows() == 1);
  CHECK(a.cols() == static_cast<std::size_t>(cfg.embed_dim));
  CHECK(a.all_finite());
  CHECK(run_backbone(m, nodes) == a);
}

TEST_CASE("positional encoding is permutation-equivariant") {
  const auto cfg = tiny_config();
  const Model m(cfg, 3);
  std::mt19937_64 rng(6);
  const auto nodes = random_nodes(12, cfg.generations, rng);
  std::vector<std::size_t> perm(nodes.size());
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<NodeContext> shuffled;
  for (auto p : perm) shuffled.push_back(nodes[p]);
  auto pe = [&](const std::vector<NodeContext>& ns) {
    nn::Graph g(false);
    ParamBinder bind(g, m);
    return g.value(positional_encoding(bind, tokenize(bind, ns), ns));
  };
  const auto a = pe(nodes), b = pe(shuffled);
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t c = 0; c < a.cols(); ++c) CHECK(b(i, c) == doctest::Approx(a(perm[i], c)).epsilon(1e-12));
}

TEST_CASE("zero attention layers is the identity") {
  auto cfg = tiny_config();
  cfg.attention_layers = 0;
  const Model m(cfg, 3);
  std::mt19937_64 rng(7);
  nn::Graph g(false);
  ParamBinder bind(g, m);
  const auto x = g.input(random_tensor({5, static_cast<std::size_t>(cfg.embed_dim)}, rng));
  CHECK(g.value(attention_stack(bind, x)) == g.value(x));
}

TEST_CASE("attention over one node reduces to the normalization chain") {
  auto cfg = tiny_config();
  const Model m(cfg, 3);
  std::mt19937_64 rng(8);
  const std::size_t d = static_cast<std::size_t>(cfg.embed_dim);
  const auto xv = random_tensor({1, d}, rng);
  nn::Graph g(false);
  ParamBinder bind(g, m);
  const auto out = g.value(attention_stack(bind, g.input(xv)));
  // Self-attention weight is 1, so MHA(x) = o(v(x)).
  const auto& L = m.backbone.layers[0];
  auto lin = [&](const Linear& l, const nn::Tensor& x) { return nn::kernels::affine(x, l.w.value, &l.b.value); };
  auto ln = [&](const nn::Tensor& x, const nn::Parameter& gm, const nn::Parameter& bt) {
    nn::Tensor y = x;
    nn::kernels::layer_norm_row(x.data(), d, nn::kLayerNormEps, y.data());
    for (std::size_t j = 0; j < d; ++j) y[j] = y[j] * gm.value[j] + bt.value[j];
    return y;
  };
  nn::Tensor mha = lin(L.o, lin(L.v, xv));
  nn::Tensor s1 = xv;
  for (std::size_t j = 0; j < d; ++j) s1[j] += mha[j];
  const nn::Tensor a1 = ln(s1, L.ln1_gamma, L.ln1_beta);
  nn::Tensor hid = lin(L.ffn1, a1);
  for (auto& v : hid.values()) v = nn::kernels::silu(v);
  const nn::Tensor f = lin(L.ffn2, hid);
  nn::Tensor s2 = a1;
  for (std::size_t j = 0; j < d; ++j) s2[j] += f[j];
  const nn::Tensor expect = ln(s2, L.ln2_gamma, L.ln2_beta);
  for (std::size_t j = 0; j < d; ++j) CHECK(out[j] == doctest::Approx(expect[j]).epsilon(1e-12));
}

TEST_CASE("backbone output ignores current-level symbols") {
  // The window contexts carry no current-level occupancy, so two trees that
  // differ only at the last level yield identical contexts and features.
  const auto cfg = tiny_config();
  const Model m(cfg, 3);
  std::vector<GridPoint> a{{0, 0, 0}, {5, 5, 5}, {9, 2, 7}};
  std::vector<GridPoint> b{{1, 0, 0}, {4, 5, 5}, {8, 3, 6}};  // same parents at depth 4
  const auto ta = build_octree(a, 4), tb = build_octree(b, 4);
  REQUIRE(std::vector<std::uint8_t>(ta.symbols(4).begin(), ta.symbols(4).end()) !=
          std::vector<std::uint8_t>(tb.symbols(4).begin(), tb.symbols(4).end()));
  const auto ca = ta.node_contexts(4, cfg.generations), cb = tb.node_contexts(4, cfg.generations);
  CHECK(run_backbone(m, ca) == run_backbone(m, cb));
}

TEST_CASE("backbone counter increments once per call") {
  const auto cfg = tiny_config();
  const Model m(cfg, 3);
  std::mt19937_64 rng(9);
  const auto nodes = random_nodes(6, cfg.generations, rng);
  InvocationCounters c;
  run_backbone(m, nodes, {}, &c);
  run_backbone(m, nodes, {}, &c);
  CHECK(c.backbone == 2);
  CHECK(c.predictor == 0);
}

TEST_CASE("the causal channel changes features only when populated") {
  const auto cfg = tiny_config();
  Model m(cfg, 3);
  std::mt19937_64 rng(10);
  m.backbone.causal_table.value = random_tensor(m.backbone.causal_table.value.shape(), rng);
  const auto nodes = random_nodes(6, cfg.generations, rng);
  std::vector<int> masked(6, 0), some{0, 7, 0, 9, 0, 0};
  const auto base = run_backbone(m, nodes, masked);
  CHECK(run_backbone(m, nodes, masked) == base);
  CHECK_FALSE(run_backbone(m, nodes, some) == base);
}
