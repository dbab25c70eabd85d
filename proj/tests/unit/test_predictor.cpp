#include <random>
#include <set>

#include "doctest.h"
#include "lpcc/error.hpp"
#include "lpcc/predictor.hpp"
#include "lpcc/trainer.hpp"
#include "test_support.hpp"

using namespace lpcc;
using namespace lpcc::testing;

namespace {

std::vector<std::uint8_t> random_symbols(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::uint8_t> s(n);
  for (auto& v : s) v = static_cast<std::uint8_t>(1 + rng() % 255);
  return s;
}

nn::Tensor random_context(std::size_t n, const Model& m, std::mt19937_64& rng) {
  return random_tensor({n, static_cast<std::size_t>(m.config().embed_dim)}, rng);
}

}  // namespace

TEST_CASE("stage plans from direct enumeration") {
  auto sets = [](const StagePlan& p) {
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t s = 1; s <= p.stages; ++s) out.push_back(p.positions(s));
    return out;
  };
  CHECK(sets(decompose_stages(6, 1)) == std::vector<std::vector<std::size_t>>{{1, 2, 3, 4, 5, 6}});
  CHECK(sets(decompose_stages(6, 6)).size() == 6);
  CHECK(decompose_stages(6, 6).autoregressive());
  CHECK(sets(decompose_stages(7, 3)) == std::vector<std::vector<std::size_t>>{{1, 4, 7}, {2, 5}, {3, 6}});
  CHECK(decompose_stages(7, 0).stages == 7);
  const auto clamped = decompose_stages(3, 8);
  CHECK(clamped.stages == 3);
  CHECK(clamped.clamped);
  CHECK_FALSE(clamped.warning.empty());
  CHECK_THROWS_AS(decompose_stages(0, 1), Error);
}

TEST_CASE("stages partition the window") {
  for (std::size_t n = 1; n <= 40; ++n)
    for (std::size_t s = 1; s <= n; ++s) {
      const auto p = decompose_stages(n, s);
      std::multiset<std::size_t> all;
      for (std::size_t k = 1; k <= p.stages; ++k) {
        const auto pos = p.positions(k);
        for (std::size_t i = 1; i < pos.size(); ++i) CHECK(pos[i] > pos[i - 1]);
        if (!pos.empty()) CHECK(p.last_position(k) == pos.back());
        for (auto q : pos) {
          all.insert(q);
          CHECK(p.stage_of(q) == k);
        }
      }
      CHECK(all.size() == n);
      CHECK(std::set<std::size_t>(all.begin(), all.end()).size() == n);
    }
}

TEST_CASE("elastic embedding adds left-sibling embeddings from earlier stages only") {
  const Model m(tiny_config(), 2);
  std::mt19937_64 rng(1);
  const auto a = random_context(4, m, rng);
  const auto plan = decompose_stages(4, 2);
  std::vector<std::uint8_t> decoded{11, 0, 13, 0};
  CHECK(elastic_causal_embed(m, a, decoded, plan, 1) == a);
  const auto f = elastic_causal_embed(m, a, decoded, plan, 2);
  const auto& t = m.predictor.sibling_table.value;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    CHECK(f(0, c) == a(0, c));
    CHECK(f(1, c) == a(1, c) + t(11, c));
    CHECK(f(2, c) == a(2, c));
    CHECK(f(3, c) == a(3, c) + t(13, c));
  }
  decoded[2] = 0;
  try {
    elastic_causal_embed(m, a, decoded, plan, 2);
    FAIL("expected an internal-sync error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::internal_sync);
  }
}

TEST_CASE("scan of length one is b * f through the output map") {
  const Model m(tiny_config(), 2);
  std::mt19937_64 rng(3);
  const auto f = random_context(1, m, rng);
  const auto out = ssm_scan(m, f);
  const std::size_t d = f.cols();
  std::vector<double> bgate(d), h(d), expect(d);
  nn::kernels::affine_row(f.data(), d, m.predictor.ssm_b.w.value.data(), m.predictor.ssm_b.b.value.data(), d, bgate.data());
  for (std::size_t c = 0; c < d; ++c) h[c] = nn::kernels::sigmoid(bgate[c]) * f[c];
  nn::kernels::affine_row(h.data(), d, m.predictor.ssm_out.w.value.data(), m.predictor.ssm_out.b.value.data(), d,
                          expect.data());
  for (std::size_t c = 0; c < d; ++c) CHECK(out[c] == expect[c] + f[c]);
}

TEST_CASE("scan output at t ignores later positions") {
  const Model m(tiny_config(), 2);
  std::mt19937_64 rng(4);
  auto f = random_context(10, m, rng);
  const auto base = ssm_scan(m, f);
  for (std::size_t c = 0; c < f.cols(); ++c) f(7, c) += 1.0;
  const auto pert = ssm_scan(m, f);
  for (std::size_t t = 0; t < 7; ++t)
    for (std::size_t c = 0; c < f.cols(); ++c) CHECK(pert(t, c) == base(t, c));
}

TEST_CASE("step replay equals the batch scan bit for bit") {
  const Model m(tiny_config(), 2);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto f = random_context(1 + rng() % 30, m, rng);
    const auto batch = ssm_scan(m, f);
    auto state = make_scan_state(m);
    for (std::size_t t = 1; t <= f.rows(); ++t) {
      const auto out = ssm_step(m, state, f.row(t - 1), t);
      CHECK(std::equal(out.begin(), out.end(), batch.row(t - 1).begin()));
    }
  }
  auto state = make_scan_state(m);
  const auto f = random_context(2, m, rng);
  try {
    ssm_step(m, state, f.row(1), 2);
    FAIL("expected a usage error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::usage);
  }
}

TEST_CASE("zero head gives the uniform distribution; outputs are probability vectors") {
  Model m(tiny_config(), 2);
  std::mt19937_64 rng(6);
  for (int i = 0; i < 1000; ++i) {
    const auto f = random_tensor({static_cast<std::size_t>(m.config().embed_dim)}, rng, -3, 3);
    const auto p = predict_distribution(m, f.values());
    double s = 0;
    for (double v : p) {
      CHECK(v > 0.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
  m.predictor.head.l2.w.value.fill(0.0);
  m.predictor.head.l2.b.value.fill(0.0);
  const auto f = random_tensor({static_cast<std::size_t>(m.config().embed_dim)}, rng);
  for (double v : predict_distribution(m, f.values())) CHECK(v == doctest::Approx(1.0 / 255.0).epsilon(1e-14));
}

TEST_CASE("predict_stage is deterministic and ignores same- and later-stage symbols") {
  const Model m(tiny_config(), 2);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + rng() % 25;
    const std::size_t S = rng() % 2 ? 0 : 1 + rng() % n;
    const auto plan = decompose_stages(n, S);
    const auto a = random_context(n, m, rng);
    const auto truth = random_symbols(n, rng);
    WindowPredictor wp1(m, a, plan), wp2(m, a, plan);
    std::vector<std::uint8_t> dec1(n, 0), dec2(n, 0);
    for (std::size_t s = 1; s <= plan.stages; ++s) {
      // Fill same- and later-stage entries of the second copy with garbage.
      for (std::size_t p = 1; p <= n; ++p)
        if (plan.stage_of(p) >= s) dec2[p - 1] = static_cast<std::uint8_t>(1 + rng() % 255);
      const auto p1 = wp1.predict_stage(s, dec1);
      const auto p2 = wp2.predict_stage(s, dec2);
      CHECK(p1 == p2);
      CHECK(p1.size() == plan.positions(s).size());
      for (auto p : plan.positions(s)) dec1[p - 1] = dec2[p - 1] = truth[p - 1];
    }
  }
}

TEST_CASE("stage requests must come in order") {
  const Model m(tiny_config(), 2);
  std::mt19937_64 rng(8);
  WindowPredictor wp(m, random_context(4, m, rng), decompose_stages(4, 2));
  std::vector<std::uint8_t> dec(4, 0);
  CHECK_THROWS_AS(wp.predict_stage(2, dec), Error);
}

TEST_CASE("autoregressive window: one backbone call, n predictor calls") {
  const Model m(tiny_config(), 2);
  std::mt19937_64 rng(9);
  const std::vector<GridPoint> pts{{0, 0, 0}, {1, 2, 3}, {7, 7, 1}, {4, 0, 6}, {5, 5, 5}};
  const auto tree = build_octree(pts, 3);
  const auto ctx = tree.node_contexts(3, m.config().generations);
  InvocationCounters c;
  const auto plan = decompose_stages(ctx.size(), 0);
  WindowPredictor wp(m, run_backbone(m, ctx, {}, &c), plan, &c);
  const auto syms = tree.symbols(3);
  std::vector<std::uint8_t> dec(ctx.size(), 0);
  for (std::size_t s = 1; s <= plan.stages; ++s) {
    wp.predict_stage(s, dec);
    dec[s - 1] = syms[s - 1];
  }
  CHECK(c.backbone == 1);
  CHECK(c.predictor == ctx.size());
}

TEST_CASE("teacher-forced training loss equals the inference distributions") {
  const Model m(tiny_config(), 4);
  std::mt19937_64 rng(10);
  for (std::size_t S : {1u, 2u, 3u, 0u}) {
    const std::size_t n = 9;
    const auto plan = decompose_stages(n, S);
    const auto a = random_context(n, m, rng);
    const auto truth = random_symbols(n, rng);
    WindowPredictor wp(m, a, plan);
    std::vector<std::uint8_t> dec(n, 0);
    double bits = 0;
    for (std::size_t s = 1; s <= plan.stages; ++s) {
      const auto pmfs = wp.predict_stage(s, dec);
      std::size_t k = 0;
      for (auto p : plan.positions(s)) {
        bits -= std::log2(pmfs[k++][truth[p - 1] - 1u]);
        dec[p - 1] = truth[p - 1];
      }
    }
    nn::Graph g(false);
    ParamBinder bind(g, m);
    const double graph_bits = g.value(window_loss_bits(bind, g.input(a), truth, plan))[0];
    CHECK(graph_bits == doctest::Approx(bits).epsilon(1e-10));
  }
}

TEST_CASE("sibling indicators cover every position but the first under S = W") {
  const Model m(tiny_config(), 4);
  std::mt19937_64 rng(11);
  const std::size_t n = 12;
  const auto truth = random_symbols(n, rng);
  nn::Graph g(false);
  ParamBinder bind(g, m);
  const auto a = g.input(random_context(n, m, rng));
  std::size_t ind = 0;
  window_loss_bits(bind, a, truth, decompose_stages(n, 0), &ind);
  CHECK(ind == n - 1);
  window_loss_bits(bind, a, truth, decompose_stages(n, 1), &ind);
  CHECK(ind == 0);
  window_loss_bits(bind, a, truth, decompose_stages(n, 4), &ind);
  CHECK(ind == n - n / 4);  // every position except each stage-1 member
}
