#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>

#include "doctest.h"
#include "json.hpp"
#include "lpcc/error.hpp"
#include "lpcc/trainer.hpp"
#include "test_support.hpp"

using namespace lpcc;
using namespace lpcc::testing;

namespace {

std::vector<TrainingWindow> small_corpus(int generations, std::size_t window, std::uint64_t seed) {
  CodecConfig codec;
  codec.depth = 8;
  codec.mode = CoordMode::cartesian;
  codec.window = window;
  return frame_windows(random_cloud(400, 10.0, seed), nullptr, codec, generations, 2);
}

std::vector<const TrainingWindow*> pointers(const std::vector<TrainingWindow>& c, std::size_t k) {
  std::vector<const TrainingWindow*> out;
  for (std::size_t i = 0; i < std::min(k, c.size()); ++i) out.push_back(&c[i]);
  return out;
}

std::vector<nn::Tensor> snapshot(Model& m) {
  std::vector<nn::Tensor> out;
  for (auto* p : m.parameters()) out.push_back(p->value);
  return out;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("lpcc_trainer_" + name);
}

}  // namespace

TEST_CASE("cross-entropy against hand values") {
  Pmf uniform;
  uniform.fill(1.0 / 255.0);
  const std::vector<Pmf> d(3, uniform);
  const std::vector<std::uint8_t> s{1, 128, 255};
  CHECK(cross_entropy_bits(d, s) == doctest::Approx(std::log2(255.0)));

  Pmf peaked{};
  peaked[9] = 0.5;
  peaked[10] = 0.5;
  bool clamped = true;
  CHECK(cross_entropy_bits(std::vector<Pmf>{peaked}, std::vector<std::uint8_t>{10}, &clamped) == doctest::Approx(1.0));
  CHECK_FALSE(clamped);
  CHECK(cross_entropy_bits(std::vector<Pmf>{peaked}, std::vector<std::uint8_t>{1}, &clamped) ==
        doctest::Approx(-std::log2(1e-12)));
  CHECK(clamped);
  CHECK_THROWS_AS(cross_entropy_bits(std::vector<Pmf>{}, std::vector<std::uint8_t>{}), Error);
  CHECK_THROWS_AS(cross_entropy_bits(d, std::vector<std::uint8_t>{1}), Error);
}

TEST_CASE("windows cover the modeled levels exactly") {
  std::vector<GridPoint> pts;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 300; ++i) pts.push_back({std::uint32_t(rng() % 128), std::uint32_t(rng() % 128), std::uint32_t(rng() % 128)});
  const auto tree = build_octree(pts, 7);
  const auto ws = collect_windows(tree, 2, 50, 2);
  std::size_t expect = 0;
  for (int l = 3; l <= 7; ++l) expect += window_partition(tree.level_size(l), 50).size();
  CHECK(ws.size() == expect);
  std::vector<std::size_t> per_level(8, 0);
  for (const auto& w : ws) {
    CHECK(w.level >= 3);
    CHECK(w.symbols.size() == w.contexts.size());
    CHECK(w.symbols.size() <= 50);
    per_level[static_cast<std::size_t>(w.level)] += w.symbols.size();
  }
  for (int l = 3; l <= 7; ++l) CHECK(per_level[static_cast<std::size_t>(l)] == tree.level_size(l));
}

TEST_CASE("configuration validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  auto bad = c;
  bad.learning_rate = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.stage_set = {};
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.stage_set = {2048};
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.causal_fraction = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.batch_windows = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("a training step lowers the loss on its batch and leaves the causal table alone") {
  Model m(tiny_config(), 1);
  const auto corpus = small_corpus(m.config().generations, 64, 2);
  const auto batch = pointers(corpus, 3);
  TrainConfig cfg;
  cfg.learning_rate = 5e-3;
  Trainer t(m, cfg);
  const auto causal_before = m.backbone.causal_table.value;
  const auto first = t.step(batch, 2);
  REQUIRE(first.ok);
  CHECK(first.grad_norm > 0.0);
  StepResult last;
  for (int i = 0; i < 30; ++i) last = t.step(batch, 2);
  CHECK(last.loss_bits < first.loss_bits);
  CHECK(m.backbone.causal_table.value == causal_before);
  CHECK(t.steps_taken() == 31);
}

TEST_CASE("the backbone receives gradient even with a single stage") {
  Model m(tiny_config(), 1);
  const auto corpus = small_corpus(m.config().generations, 64, 3);
  const auto before = m.backbone.message.w.value;
  Trainer t(m, TrainConfig{});
  REQUIRE(t.step(pointers(corpus, 1), 1).ok);
  CHECK_FALSE(m.backbone.message.w.value == before);
}

TEST_CASE("sibling indicators appear only with several stages") {
  Model m(tiny_config(), 1);
  const auto corpus = small_corpus(m.config().generations, 64, 4);
  Trainer t(m, TrainConfig{});
  CHECK(t.step(pointers(corpus, 2), 1).indicators == 0);
  CHECK(t.step(pointers(corpus, 2), kStagesAutoregressive).indicators > 0);
}

TEST_CASE("causal steps update only the causal table") {
  Model m(tiny_config(), 1);
  const auto corpus = small_corpus(m.config().generations, 64, 5);
  Trainer t(m, TrainConfig{});
  auto before = snapshot(m);
  const auto r = t.causal_step(pointers(corpus, 2), 4, 3);
  REQUIRE(r.ok);
  CHECK(r.causal_step);
  const auto params = m.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    INFO(params[i]->name);
    if (params[i] == &m.backbone.causal_table)
      CHECK_FALSE(params[i]->value == before[i]);
    else
      CHECK(params[i]->value == before[i]);
  }
}

TEST_CASE("a non-finite loss aborts the step without touching the weights") {
  Model m(tiny_config(), 1);
  const auto corpus = small_corpus(m.config().generations, 64, 6);
  m.predictor.head.l2.b.value[0] = std::numeric_limits<double>::infinity();
  const auto before = snapshot(m);
  Trainer t(m, TrainConfig{});
  const auto r = t.step(pointers(corpus, 1), 1);
  CHECK_FALSE(r.ok);
  CHECK_FALSE(r.error.empty());
  CHECK(snapshot(m) == before);
  CHECK(t.steps_taken() == 0);
}

TEST_CASE("overfitting a single repeated symbol drives its probability above 0.9") {
  Model m(tiny_config(), 2);
  TrainingWindow w;
  w.level = 4;
  std::vector<GridPoint> pts;
  for (std::uint32_t i = 0; i < 16; ++i) pts.push_back({i * 2, i * 2, 0});
  const auto tree = build_octree(pts, 5);
  w.contexts = tree.node_contexts(4, m.config().generations);
  w.symbols.assign(w.contexts.size(), 0x81);
  TrainConfig cfg;
  cfg.learning_rate = 2e-2;
  cfg.weight_decay = 0.0;
  Trainer t(m, cfg);
  const TrainingWindow* batch[] = {&w};
  for (int i = 0; i < 150; ++i) REQUIRE(t.step(batch, 1).ok);
  const auto plan = decompose_stages(w.symbols.size(), 1);
  WindowPredictor wp(m, run_backbone(m, w.contexts), plan);
  std::vector<std::uint8_t> dec(w.symbols.size(), 0);
  for (const auto& p : wp.predict_stage(1, dec)) CHECK(p[0x81 - 1] > 0.9);
}

TEST_CASE("fit is reproducible from its seed and writes one log line per step") {
  const auto corpus = small_corpus(tiny_config().generations, 32, 7);
  TrainConfig cfg;
  cfg.max_steps = 12;
  cfg.batch_windows = 2;
  cfg.window = 32;
  cfg.seed = 99;
  cfg.causal_fraction = 0.3;
  cfg.log_path = temp_path("log.jsonl");
  cfg.checkpoint_path = temp_path("ckpt.bin");
  cfg.checkpoint_every = 5;
  Model a(tiny_config(), 3), b(tiny_config(), 3);
  const auto ra = Trainer(a, cfg).fit(corpus);
  const auto rb = Trainer(b, cfg).fit(corpus);
  CHECK(ra.steps == 12);
  CHECK(a.weights_digest() == b.weights_digest());
  CHECK(ra.last_loss == rb.last_loss);

  std::ifstream log(cfg.log_path);
  std::string line;
  std::size_t lines = 0;
  bool saw_causal = false;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("step").get<std::size_t>() == ++lines);
    CHECK(j.contains("S"));
    CHECK(j.contains("wall_seconds"));
    saw_causal = saw_causal || j.contains("causal");
  }
  CHECK(lines == 12);
  CHECK(saw_causal);
  const Model restored = Model::load(cfg.checkpoint_path, &a.config());
  CHECK(restored.weights_digest() == a.weights_digest());
  std::filesystem::remove(cfg.log_path);
  std::filesystem::remove(cfg.checkpoint_path);
}

TEST_CASE("stage sampling draws every entry of the set") {
  const auto corpus = small_corpus(tiny_config().generations, 32, 8);
  TrainConfig cfg;
  cfg.max_steps = 40;
  cfg.batch_windows = 1;
  cfg.window = 32;
  Model m(tiny_config(), 4);
  const auto r = Trainer(m, cfg).fit(corpus);
  std::set<std::size_t> seen;
  for (const auto& s : r.history) seen.insert(s.stages);
  CHECK(seen == std::set<std::size_t>{1, 2, 4, kStagesAutoregressive});
}

TEST_CASE("evaluate does not change the weights and matches the step loss") {
  Model m(tiny_config(), 5);
  const auto corpus = small_corpus(m.config().generations, 64, 9);
  const std::vector<TrainingWindow> one(corpus.begin(), corpus.begin() + 1);
  Trainer t(m, TrainConfig{});
  const auto digest = m.weights_digest();
  const double e = t.evaluate(one, 4);
  CHECK(m.weights_digest() == digest);
  const auto r = t.step(pointers(one, 1), 4);
  CHECK(r.loss_bits == doctest::Approx(e).epsilon(1e-12));
}
