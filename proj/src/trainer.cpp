#include "lpcc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"
#include "lpcc/backbone.hpp"
#include "lpcc/error.hpp"

namespace lpcc {

void TrainConfig::validate() const {
  require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorKind::invalid_argument,
          "learning rate must be positive");
  require(batch_windows >= 1, ErrorKind::invalid_argument, "batch must hold at least one window");
  require(epochs >= 1 || max_steps > 0, ErrorKind::invalid_argument, "nothing to train: no epochs and no steps");
  require(window >= 1, ErrorKind::invalid_argument, "window must be positive");
  require(!stage_set.empty(), ErrorKind::invalid_argument, "stage-sampling set is empty");
  for (auto s : stage_set)
    require(s == kStagesAutoregressive || s <= window, ErrorKind::invalid_argument,
            "stage-set entry " + std::to_string(s) + " outside [1, window]");
  require(causal_fraction >= 0.0 && causal_fraction <= 1.0, ErrorKind::invalid_argument,
          "causal fraction must be in [0, 1]");
  require(clip_norm > 0.0, ErrorKind::invalid_argument, "clip norm must be positive");
}

std::vector<TrainingWindow> collect_windows(const OctreeLevels& tree, int generations, std::size_t window,
                                            int direct_levels) {
  std::vector<TrainingWindow> out;
  for (int level = direct_levels + 1; level <= tree.depth(); ++level) {
    const auto symbols = tree.symbols(level);
    const auto contexts = tree.node_contexts(level, generations);
    for (const auto& w : window_partition(symbols.size(), window)) {
      TrainingWindow tw;
      tw.level = level;
      tw.contexts.assign(contexts.begin() + static_cast<std::ptrdiff_t>(w.begin),
                         contexts.begin() + static_cast<std::ptrdiff_t>(w.begin + w.length));
      tw.symbols.assign(symbols.begin() + static_cast<std::ptrdiff_t>(w.begin),
                        symbols.begin() + static_cast<std::ptrdiff_t>(w.begin + w.length));
      out.push_back(std::move(tw));
    }
  }
  return out;
}

std::vector<TrainingWindow> frame_windows(std::span<const Point3> points, const SensorIntrinsics* intr,
                                          const CodecConfig& codec, int generations, int direct_levels) {
  const auto pre = preprocess(points, codec.mode, intr, codec.depth);
  const auto tree = build_octree(pre.grid, codec.depth);
  return collect_windows(tree, generations, codec.window, direct_levels);
}

double cross_entropy_bits(std::span<const Pmf> distributions, std::span<const std::uint8_t> symbols,
                          bool* clamped) {
  require(distributions.size() == symbols.size(), ErrorKind::invalid_argument,
          "one distribution per symbol is required");
  require(!symbols.empty(), ErrorKind::invalid_argument, "cross-entropy of an empty batch");
  bool any = false;
  double bits = 0.0;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    require(symbols[i] >= 1, ErrorKind::invalid_argument, "symbol 0 is not an occupancy code");
    double p = distributions[i][symbols[i] - 1u];
    if (!(p >= 1e-12)) {
      p = 1e-12;
      any = true;
    }
    bits -= std::log2(p);
  }
  if (clamped) *clamped = any;
  return bits / static_cast<double>(symbols.size());
}

namespace {

std::size_t plan_stages(std::size_t stages, std::size_t n) {
  return stages == kStagesAutoregressive ? n : std::min(stages, n);
}

std::vector<nn::Parameter*> trainable_without_causal(Model& m) {
  std::vector<nn::Parameter*> out;
  for (auto* p : m.parameters())
    if (p != &m.backbone.causal_table) out.push_back(p);
  return out;
}

}  // namespace

Trainer::Trainer(Model& model, TrainConfig cfg)
    : model_(model),
      cfg_(std::move(cfg)),
      params_(trainable_without_causal(model)),
      causal_params_{&model.backbone.causal_table},
      opt_(params_, nn::AdamWConfig{cfg_.learning_rate, 0.9, 0.999, 1e-8, cfg_.weight_decay}),
      causal_opt_(causal_params_, nn::AdamWConfig{cfg_.learning_rate, 0.9, 0.999, 1e-8, cfg_.weight_decay}) {
  cfg_.validate();
}

StepResult Trainer::finish_step(StepResult r, nn::Graph& g, nn::Var total, std::size_t symbols) {
  r.symbols = symbols;
  try {
    const nn::Var loss = nn::scale(g, total, 1.0 / static_cast<double>(symbols));
    r.loss_bits = g.value(loss)[0];
    g.backward(loss);
    // The causal channel is a correction on top of the shared model, so the
    // two objectives update disjoint parameter sets.
    r.grad_norm = nn::clip_grad_norm(r.causal_step ? causal_params_ : params_, cfg_.clip_norm);
    require(std::isfinite(r.grad_norm), ErrorKind::numeric, "non-finite gradient norm");
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::numeric) throw;
    model_.zero_grad();
    r.ok = false;
    r.error = e.what();
    return r;
  }
  (r.causal_step ? causal_opt_ : opt_).step();
  model_.zero_grad();
  ++steps_;
  return r;
}

StepResult Trainer::step(std::span<const TrainingWindow* const> batch, std::size_t stages) {
  require(!batch.empty(), ErrorKind::invalid_argument, "empty training batch");
  StepResult r;
  r.stages = stages;
  model_.zero_grad();
  nn::Graph g(true);
  ParamBinder bind(g, model_);
  nn::Var total;
  std::size_t symbols = 0;
  try {
    for (const auto* w : batch) {
      const std::size_t n = w->symbols.size();
      const StagePlan plan = decompose_stages(n, plan_stages(stages, n));
      const nn::Var ctx = backbone_forward(bind, w->contexts);
      std::size_t ind = 0;
      const nn::Var bits = window_loss_bits(bind, ctx, w->symbols, plan, &ind);
      total = total.valid() ? nn::add(g, total, bits) : bits;
      symbols += n;
      r.indicators += ind;
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::numeric) throw;
    r.ok = false;
    r.error = e.what();
    return r;
  }
  return finish_step(r, g, total, symbols);
}

StepResult Trainer::causal_step(std::span<const TrainingWindow* const> batch, std::size_t stages,
                                std::size_t stage) {
  require(!batch.empty(), ErrorKind::invalid_argument, "empty training batch");
  StepResult r;
  r.stages = stages;
  r.causal_step = true;
  model_.zero_grad();
  nn::Graph g(true);
  ParamBinder bind(g, model_);
  nn::Var total;
  std::size_t symbols = 0;
  try {
    for (const auto* w : batch) {
      const std::size_t n = w->symbols.size();
      const StagePlan plan = decompose_stages(n, plan_stages(stages, n));
      const std::size_t s = std::min(stage, plan.stages);
      std::vector<int> causal(n, 0);
      for (std::size_t p = 1; p <= n; ++p)
        if (plan.stage_of(p) < s) causal[p - 1] = w->symbols[p - 1];
      const nn::Var ctx = backbone_forward(bind, w->contexts, causal);
      total = total.valid() ? nn::add(g, total, stage_loss_bits(bind, ctx, w->symbols, plan, s))
                            : stage_loss_bits(bind, ctx, w->symbols, plan, s);
      symbols += plan.positions(s).size();
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::numeric) throw;
    r.ok = false;
    r.error = e.what();
    return r;
  }
  return finish_step(r, g, total, symbols);
}

TrainReport Trainer::fit(std::span<const TrainingWindow> corpus) {
  require(!corpus.empty(), ErrorKind::invalid_argument, "empty training corpus");
  std::mt19937_64 rng(cfg_.seed);
  std::ofstream log;
  if (!cfg_.log_path.empty()) {
    log.open(cfg_.log_path);
    require(static_cast<bool>(log), ErrorKind::io, "cannot open training log " + cfg_.log_path.string());
  }
  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t epochs = cfg_.max_steps > 0 ? std::numeric_limits<std::size_t>::max()
                                                : static_cast<std::size_t>(cfg_.epochs);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    // Fisher-Yates with the raw generator keeps the order independent of the
    // standard library's distribution implementations.
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    for (std::size_t first = 0; first < order.size(); first += cfg_.batch_windows) {
      if (cfg_.max_steps > 0 && report.steps >= cfg_.max_steps) break;
      std::vector<const TrainingWindow*> batch;
      for (std::size_t k = first; k < std::min(order.size(), first + cfg_.batch_windows); ++k)
        batch.push_back(&corpus[order[k]]);
      const std::size_t stages = cfg_.stage_set[rng() % cfg_.stage_set.size()];
      StepResult r;
      const bool causal = cfg_.causal_fraction > 0.0 &&
                          static_cast<double>(rng() >> 11) * 0x1.0p-53 < cfg_.causal_fraction;
      if (causal) {
        const std::size_t max_s = stages == kStagesAutoregressive ? cfg_.window : stages;
        r = causal_step(batch, stages, 1 + rng() % max_s);
      } else {
        r = step(batch, stages);
      }
      ++report.steps;
      if (!r.ok) ++report.aborted;
      if (r.ok) {
        if (report.steps - report.aborted == 1) report.first_loss = r.loss_bits;
        report.last_loss = r.loss_bits;
      }
      if (log) {
        nlohmann::json rec{{"step", report.steps},
                           {"S", stages},
                           {"loss_bits", r.ok ? nlohmann::json(r.loss_bits) : nlohmann::json(nullptr)},
                           {"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
        if (causal) rec["causal"] = true;
        if (!r.ok) rec["error"] = r.error;
        log << rec.dump() << '\n';
        log.flush();
      }
      report.history.push_back(std::move(r));
      if (cfg_.checkpoint_every > 0 && !cfg_.checkpoint_path.empty() && report.steps % cfg_.checkpoint_every == 0)
        model_.save(cfg_.checkpoint_path);
    }
    if (cfg_.max_steps > 0 && report.steps >= cfg_.max_steps) break;
  }
  if (!cfg_.checkpoint_path.empty()) model_.save(cfg_.checkpoint_path);
  return report;
}

double Trainer::evaluate(std::span<const TrainingWindow> corpus, std::size_t stages) const {
  double bits = 0.0;
  std::size_t symbols = 0;
  const Model& m = model_;
  for (const auto& w : corpus) {
    nn::Graph g(false);
    ParamBinder bind(g, m);
    const std::size_t n = w.symbols.size();
    const StagePlan plan = decompose_stages(n, plan_stages(stages, n));
    const nn::Var ctx = backbone_forward(bind, w.contexts);
    bits += g.value(window_loss_bits(bind, ctx, w.symbols, plan))[0];
    symbols += n;
  }
  require(symbols > 0, ErrorKind::invalid_argument, "empty evaluation corpus");
  return bits / static_cast<double>(symbols);
}

}  // namespace lpcc
