#include "lpcc/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lpcc/error.hpp"

namespace lpcc {

std::vector<std::size_t> StagePlan::positions(std::size_t stage) const {
  std::vector<std::size_t> out;
  for (std::size_t p = stage; p <= length; p += stages) out.push_back(p);
  return out;
}

std::size_t StagePlan::last_position(std::size_t stage) const {
  if (stage > length) return 0;
  return stage + (length - stage) / stages * stages;
}

StagePlan decompose_stages(std::size_t n, std::size_t stages) {
  require(n >= 1, ErrorKind::invalid_argument, "stage decomposition of an empty window");
  StagePlan plan;
  plan.length = n;
  if (stages == 0) {
    plan.stages = n;
  } else if (stages > n) {
    plan.stages = n;
    plan.clamped = true;
    plan.warning = "stage count " + std::to_string(stages) + " exceeds window length " + std::to_string(n) +
                   "; clamped to " + std::to_string(n);
  } else {
    plan.stages = stages;
  }
  return plan;
}

nn::Tensor elastic_causal_embed(const Model& model, const nn::Tensor& context,
                                std::span<const std::uint8_t> decoded, const StagePlan& plan,
                                std::size_t stage, std::size_t rows) {
  const std::size_t n = plan.length;
  require(context.rows() == n && decoded.size() == n, ErrorKind::invalid_argument,
          "context/decoded length does not match the stage plan");
  require(stage >= 1 && stage <= plan.stages, ErrorKind::invalid_argument, "stage index out of range");
  if (rows == 0) rows = n;
  const std::size_t d = context.cols();
  const auto& table = model.predictor.sibling_table.value;
  nn::Tensor f = nn::Tensor::matrix(rows, d);
  std::copy_n(context.data(), rows * d, f.data());
  for (std::size_t i = 2; i <= rows; ++i) {
    if (plan.stage_of(i - 1) >= stage) continue;
    const std::uint8_t sym = decoded[i - 2];
    require(sym != 0, ErrorKind::internal_sync,
            "sibling at position " + std::to_string(i - 1) + " should be decoded but is missing");
    const double* src = table.data() + static_cast<std::size_t>(sym) * d;
    double* dst = f.data() + (i - 1) * d;
    for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
  }
  return f;
}

namespace {

void gates_row(const PredictorWeights& p, const double* f, std::size_t d, double* a, double* b) {
  nn::kernels::affine_row(f, d, p.ssm_a.w.value.data(), p.ssm_a.b.value.data(), d, a);
  nn::kernels::affine_row(f, d, p.ssm_b.w.value.data(), p.ssm_b.b.value.data(), d, b);
  for (std::size_t c = 0; c < d; ++c) {
    a[c] = nn::kernels::sigmoid(a[c]);
    b[c] = nn::kernels::sigmoid(b[c]);
  }
}

void output_row(const PredictorWeights& p, const double* h, const double* f, std::size_t d, double* out) {
  nn::kernels::affine_row(h, d, p.ssm_out.w.value.data(), p.ssm_out.b.value.data(), d, out);
  for (std::size_t c = 0; c < d; ++c) out[c] += f[c];
}

}  // namespace

nn::Tensor ssm_scan(const Model& model, const nn::Tensor& features) {
  const auto& p = model.predictor;
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  require(d == static_cast<std::size_t>(model.config().embed_dim), ErrorKind::invalid_argument,
          "scan feature width does not match the model");
  nn::Tensor a = nn::Tensor::matrix(n, d);
  nn::Tensor b = nn::Tensor::matrix(n, d);
  for (std::size_t t = 0; t < n; ++t)
    gates_row(p, features.data() + t * d, d, a.data() + t * d, b.data() + t * d);
  nn::Tensor h = nn::Tensor::matrix(n, d);
  std::vector<double> state(d, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    nn::diag_scan_step(a.data() + t * d, b.data() + t * d, features.data() + t * d, d, state.data());
    std::copy(state.begin(), state.end(), h.data() + t * d);
  }
  nn::Tensor out = nn::Tensor::matrix(n, d);
  for (std::size_t t = 0; t < n; ++t)
    output_row(p, h.data() + t * d, features.data() + t * d, d, out.data() + t * d);
  require(out.all_finite(), ErrorKind::numeric, "scan produced a non-finite value");
  return out;
}

ScanState make_scan_state(const Model& model) {
  ScanState s;
  s.h.assign(static_cast<std::size_t>(model.config().embed_dim), 0.0);
  return s;
}

std::vector<double> ssm_step(const Model& model, ScanState& state, std::span<const double> feature,
                             std::size_t t) {
  require(state.cursor + 1 == t, ErrorKind::usage,
          "scan step for position " + std::to_string(t) + " but the state is at " + std::to_string(state.cursor));
  const std::size_t d = state.h.size();
  require(feature.size() == d, ErrorKind::invalid_argument, "scan step feature width mismatch");
  const auto& p = model.predictor;
  std::vector<double> a(d), b(d), out(d);
  gates_row(p, feature.data(), d, a.data(), b.data());
  nn::diag_scan_step(a.data(), b.data(), feature.data(), d, state.h.data());
  output_row(p, state.h.data(), feature.data(), d, out.data());
  ++state.cursor;
  for (double v : out) require(std::isfinite(v), ErrorKind::numeric, "scan step produced a non-finite value");
  return out;
}

Pmf predict_distribution(const Model& model, std::span<const double> refined) {
  const auto& head = model.predictor.head;
  const std::size_t d = refined.size();
  const std::size_t hidden = head.l1.b.value.size();
  require(d == head.l1.w.value.rows(), ErrorKind::invalid_argument, "head input width mismatch");
  std::vector<double> z(hidden);
  nn::kernels::affine_row(refined.data(), d, head.l1.w.value.data(), head.l1.b.value.data(), hidden, z.data());
  for (auto& v : z) v = nn::kernels::silu(v);
  std::array<double, kAlphabet> logits{};
  nn::kernels::affine_row(z.data(), hidden, head.l2.w.value.data(), head.l2.b.value.data(), kAlphabet,
                          logits.data());
  for (double v : logits) require(std::isfinite(v), ErrorKind::numeric, "non-finite logit");
  Pmf p{};
  nn::kernels::softmax_row(logits.data(), kAlphabet, p.data());
  return p;
}

WindowPredictor::WindowPredictor(const Model& model, nn::Tensor context, StagePlan plan,
                                 InvocationCounters* counters)
    : model_(model),
      context_(std::move(context)),
      plan_(std::move(plan)),
      counters_(counters),
      step_path_(plan_.autoregressive()),
      state_(make_scan_state(model)) {
  require(context_.rows() == plan_.length, ErrorKind::invalid_argument, "context rows do not match the plan");
}

void WindowPredictor::set_context(nn::Tensor context) {
  require(context.rows() == plan_.length, ErrorKind::invalid_argument, "context rows do not match the plan");
  context_ = std::move(context);
  step_path_ = false;
}

std::vector<Pmf> WindowPredictor::predict_stage(std::size_t stage, std::span<const std::uint8_t> decoded) {
  require(stage == next_stage_ && stage <= plan_.stages, ErrorKind::usage,
          "stage " + std::to_string(stage) + " requested out of order");
  require(decoded.size() == plan_.length, ErrorKind::invalid_argument, "decoded array length mismatch");
  ++next_stage_;
  if (counters_) counters_->predictor.fetch_add(1, std::memory_order_relaxed);
  const std::size_t d = context_.cols();

  if (step_path_) {
    // Autoregressive: stage s is position s and every earlier position is
    // decoded, so one recurrence step per stage suffices.
    const std::size_t t = stage;
    std::vector<double> f(context_.data() + (t - 1) * d, context_.data() + t * d);
    if (t >= 2) {
      const std::uint8_t sym = decoded[t - 2];
      require(sym != 0, ErrorKind::internal_sync, "left sibling missing in autoregressive step");
      const double* src = model_.predictor.sibling_table.value.data() + static_cast<std::size_t>(sym) * d;
      for (std::size_t c = 0; c < d; ++c) f[c] += src[c];
    }
    const auto out = ssm_step(model_, state_, f, t);
    return {predict_distribution(model_, out)};
  }

  const std::size_t rows = plan_.last_position(stage);
  const nn::Tensor f = elastic_causal_embed(model_, context_, decoded, plan_, stage, rows);
  const nn::Tensor refined = ssm_scan(model_, f);
  std::vector<Pmf> out;
  for (std::size_t p = stage; p <= plan_.length; p += plan_.stages) out.push_back(predict_distribution(model_, refined.row(p - 1)));
  return out;
}

nn::Var predictor_features(ParamBinder& bind, nn::Var context, std::span<const int> sibling) {
  auto& g = bind.graph();
  const auto& p = bind.model().predictor;
  nn::Var f = nn::embed_add(g, context, bind(p.sibling_table), sibling);
  nn::Var a = nn::sigmoid(g, apply(bind, p.ssm_a, f));
  nn::Var b = nn::sigmoid(g, apply(bind, p.ssm_b, f));
  nn::Var h = nn::diag_scan(g, a, b, f);
  return nn::add(g, apply(bind, p.ssm_out, h), f);
}

nn::Var head_logits(ParamBinder& bind, nn::Var refined) {
  return apply(bind, bind.model().predictor.head, refined);
}

namespace {

// Loss of one teacher-forced pass. With `all_rows` every position is scored
// (S = 1 and autoregressive plans); otherwise only the positions of `stage`.
nn::Var stage_pass(ParamBinder& bind, nn::Var context, std::span<const std::uint8_t> symbols,
                   const StagePlan& plan, std::size_t stage, bool all_rows, std::size_t& indicators) {
  auto& g = bind.graph();
  const std::size_t n = plan.length;
  std::vector<int> sibling(n, -1);
  for (std::size_t i = 2; i <= n; ++i) {
    const bool on = plan.stages > 1 && (plan.autoregressive() || plan.stage_of(i - 1) < stage);
    if (on) sibling[i - 1] = symbols[i - 2];
  }
  nn::Var refined = predictor_features(bind, context, sibling);
  std::vector<std::uint32_t> rows;
  std::vector<int> targets;
  for (std::size_t i = all_rows ? 1 : stage; i <= n; i += all_rows ? 1 : plan.stages) {
    rows.push_back(static_cast<std::uint32_t>(i - 1));
    targets.push_back(symbols[i - 1] - 1);
    if (sibling[i - 1] >= 0) ++indicators;
  }
  nn::Var sel = all_rows ? refined : nn::gather_rows(g, refined, rows);
  nn::Var logp = nn::log_softmax(g, head_logits(bind, sel));
  return nn::sum(g, nn::pick(g, logp, targets));
}

void check_symbols(std::span<const std::uint8_t> symbols, const StagePlan& plan) {
  require(symbols.size() == plan.length, ErrorKind::invalid_argument, "symbol count does not match the plan");
  for (auto s : symbols) require(s != 0, ErrorKind::invalid_argument, "occupancy symbol 0 in training data");
}

}  // namespace

nn::Var window_loss_bits(ParamBinder& bind, nn::Var context, std::span<const std::uint8_t> symbols,
                         const StagePlan& plan, std::size_t* indicator_count) {
  auto& g = bind.graph();
  check_symbols(symbols, plan);
  std::size_t indicators = 0;
  // In autoregressive mode every position sees its left sibling, and the scan
  // output at i depends on the prefix only, so one pass covers all stages.
  // S = 1 is the same pass with no siblings at all.
  const bool single_pass = plan.stages == 1 || plan.autoregressive();
  const std::size_t passes = single_pass ? 1 : plan.stages;
  nn::Var total = stage_pass(bind, context, symbols, plan, 1, single_pass, indicators);
  for (std::size_t s = 2; s <= passes; ++s)
    total = nn::add(g, total, stage_pass(bind, context, symbols, plan, s, false, indicators));
  if (indicator_count) *indicator_count = indicators;
  return nn::scale(g, total, -1.0 / std::numbers::ln2);
}

nn::Var stage_loss_bits(ParamBinder& bind, nn::Var context, std::span<const std::uint8_t> symbols,
                        const StagePlan& plan, std::size_t stage) {
  check_symbols(symbols, plan);
  require(stage >= 1 && stage <= plan.stages, ErrorKind::invalid_argument, "stage out of range");
  std::size_t indicators = 0;
  const nn::Var bits = stage_pass(bind, context, symbols, plan, stage, false, indicators);
  return nn::scale(bind.graph(), bits, -1.0 / std::numbers::ln2);
}

}  // namespace lpcc
