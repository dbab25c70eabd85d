#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lpcc/backbone.hpp"
#include "lpcc/predictor.hpp"
#include "test_support.hpp"

namespace lpcc::testing {

struct NamedCheck {
  std::string name;
  GradCheckResult result;
};

/// Fixed random linear functional, so every output entry feeds the loss.
inline nn::Var probe(nn::Graph& g, nn::Var y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& v = g.value(y);
  return nn::sum(g, nn::mul(g, y, g.input(random_tensor(v.shape(), rng))));
}

/// Gradient checks for every differentiable primitive on one random
/// configuration drawn from `seed`.
inline std::vector<NamedCheck> primitive_grad_checks(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t n = 2 + rng() % 4;
  const std::size_t m = 2 + rng() % 4;
  const std::size_t k = 2 + rng() % 4;
  std::vector<NamedCheck> out;
  auto param = [&](std::string name, std::vector<std::size_t> shape, double lo = -1.0, double hi = 1.0) {
    return nn::Parameter(std::move(name), random_tensor(std::move(shape), rng, lo, hi));
  };
  auto run = [&](const std::string& name, std::vector<nn::Parameter*> ps, std::function<nn::Var(nn::Graph&)> f) {
    out.push_back({name, grad_check(ps, f)});
  };

  auto x = param("x", {n, m});
  auto x2 = param("x2", {n, m});
  auto w = param("w", {m, k});
  auto b = param("b", {k});
  auto y = param("y", {m, k});
  auto gamma = param("gamma", {m});
  auto beta = param("beta", {m});
  run("affine", {&x, &w, &b}, [&](nn::Graph& g) {
    return probe(g, nn::affine(g, g.param(x), g.param(w), g.param(b)), seed);
  });
  run("matmul", {&x, &y}, [&](nn::Graph& g) { return probe(g, nn::matmul(g, g.param(x), g.param(y)), seed); });
  run("matmul_nt", {&x, &x2}, [&](nn::Graph& g) {
    return probe(g, nn::matmul_nt(g, g.param(x), g.param(x2)), seed);
  });
  run("add_sub_mul_scale", {&x, &x2}, [&](nn::Graph& g) {
    const auto a = g.param(x), c = g.param(x2);
    return probe(g, nn::scale(g, nn::mul(g, nn::add(g, a, c), nn::sub(g, a, c)), 0.7), seed);
  });
  run("scale_shift", {&x, &gamma, &beta}, [&](nn::Graph& g) {
    return probe(g, nn::scale_shift(g, g.param(x), g.param(gamma), g.param(beta)), seed);
  });
  run("silu", {&x}, [&](nn::Graph& g) { return probe(g, nn::silu(g, nn::scale(g, g.param(x), 3.0)), seed); });
  run("sigmoid", {&x}, [&](nn::Graph& g) { return probe(g, nn::sigmoid(g, nn::scale(g, g.param(x), 3.0)), seed); });
  run("layer_norm", {&x}, [&](nn::Graph& g) { return probe(g, nn::layer_norm(g, g.param(x)), seed); });
  run("softmax", {&x}, [&](nn::Graph& g) { return probe(g, nn::softmax(g, g.param(x)), seed); });
  run("log_softmax", {&x}, [&](nn::Graph& g) { return probe(g, nn::log_softmax(g, g.param(x)), seed); });

  auto table = param("table", {6, m});
  std::vector<int> idx(n);
  for (auto& i : idx) i = static_cast<int>(rng() % 7) - 1;  // -1 = zero row
  run("embed", {&table}, [&](nn::Graph& g) { return probe(g, nn::embed(g, g.param(table), idx), seed); });
  run("embed_add", {&x, &table}, [&](nn::Graph& g) {
    return probe(g, nn::embed_add(g, g.param(x), g.param(table), idx), seed);
  });
  std::vector<std::uint32_t> rows;
  for (std::size_t i = 0; i < n + 2; ++i) rows.push_back(static_cast<std::uint32_t>(rng() % n));
  run("gather_rows", {&x}, [&](nn::Graph& g) { return probe(g, nn::gather_rows(g, g.param(x), rows), seed); });
  run("concat_slice", {&x, &x2}, [&](nn::Graph& g) {
    const nn::Var parts[] = {g.param(x), g.param(x2)};
    const auto c = nn::concat_cols(g, parts);
    return probe(g, nn::slice_cols(g, c, 1, m), seed);
  });
  std::vector<std::vector<std::uint32_t>> lists(n);
  for (std::size_t i = 0; i < n; ++i) {
    lists[i].push_back(static_cast<std::uint32_t>(i));
    for (int j = 0; j < 2; ++j) lists[i].push_back(static_cast<std::uint32_t>(rng() % n));
  }
  run("neighbor_max", {&x}, [&](nn::Graph& g) {
    return probe(g, nn::neighbor_max(g, g.param(x), lists), seed);
  });
  auto ga = param("a", {n, m}, 0.05, 0.95);
  auto gb = param("b", {n, m}, 0.05, 0.95);
  run("diag_scan", {&ga, &gb, &x}, [&](nn::Graph& g) {
    return probe(g, nn::diag_scan(g, g.param(ga), g.param(gb), g.param(x)), seed);
  });
  std::vector<int> cols(n);
  for (auto& c : cols) c = static_cast<int>(rng() % m);
  run("pick_sum_mean", {&x}, [&](nn::Graph& g) {
    const auto p = nn::pick(g, nn::log_softmax(g, g.param(x)), cols);
    return nn::add(g, nn::sum(g, p), nn::mean(g, nn::mul(g, g.param(x), g.param(x))));
  });
  return out;
}

/// Composed backbone + predictor loss on a small random window. Every
/// parameter tensor is probed at `entries` random positions.
inline NamedCheck model_grad_check(std::uint64_t seed, std::size_t entries = 3) {
  std::mt19937_64 rng(seed);
  ModelConfig cfg = tiny_config();
  Model model(cfg, seed);
  // Non-trivial values everywhere, including the zero-initialized causal table.
  for (auto* p : model.parameters())
    for (auto& v : p->value.values()) v += std::uniform_real_distribution<double>(-0.2, 0.2)(rng);
  // Sharper attention so the query/key paths carry measurable gradient.
  for (auto& layer : model.backbone.layers)
    for (auto* w : {&layer.q.w.value, &layer.k.w.value})
      for (auto& v : w->values()) v *= 3.0;

  std::vector<GridPoint> pts;
  std::uniform_int_distribution<std::uint32_t> u(0, 63);
  for (int i = 0; i < 40; ++i) pts.push_back({u(rng), u(rng), u(rng)});
  const auto tree = build_octree(pts, 6);
  int level = 3;
  while (level < 6 && tree.level_size(level) < 8) ++level;
  auto ctx = tree.node_contexts(level, cfg.generations);
  const auto syms = tree.symbols(level);
  const std::size_t n = std::min<std::size_t>(ctx.size(), 10);
  ctx.resize(n);
  std::vector<std::uint8_t> symbols(syms.begin(), syms.begin() + static_cast<std::ptrdiff_t>(n));
  const std::size_t stages = rng() % 4;  // 0 = autoregressive
  const StagePlan plan = decompose_stages(n, stages);
  std::vector<int> causal(n, 0);
  for (std::size_t i = 0; i < n; i += 2) causal[i] = symbols[i];

  auto build = [&](nn::Graph& g) {
    ParamBinder bind(g, model);
    const auto a = backbone_forward(bind, ctx, causal);
    return window_loss_bits(bind, a, symbols, plan);
  };
  return {"model(S=" + (stages == 0 ? std::string("AR") : std::to_string(stages)) + ")", grad_check(model.parameters(), build, 1e-5, entries, seed)};
}

}  // namespace lpcc::testing
