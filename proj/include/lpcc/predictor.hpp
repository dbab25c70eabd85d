#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lpcc/backbone.hpp"
#include "lpcc/model.hpp"

namespace lpcc {

/// Interleaved decomposition of a window of n positions (1-based) into S
/// stages: stage s holds positions k*S + s.
struct StagePlan {
  std::size_t length = 0;
  std::size_t stages = 1;
  bool clamped = false;  // requested S exceeded n
  std::string warning;

  std::size_t stage_of(std::size_t position) const { return (position - 1) % stages + 1; }
  std::vector<std::size_t> positions(std::size_t stage) const;
  std::size_t last_position(std::size_t stage) const;
  bool autoregressive() const { return stages == length; }
};

/// S = 0 means autoregressive (S = n); S > n is clamped to n and flagged.
StagePlan decompose_stages(std::size_t n, std::size_t stages);

using Pmf = std::array<double, kAlphabet>;  // index j is symbol j + 1

/// Fused features for stage s over the first `rows` positions (0 = all):
/// f_i = a_i + Emb(o_{i-1}) when position i-1 belongs to an earlier stage.
/// `decoded` holds one entry per position, 0 where not yet known.
nn::Tensor elastic_causal_embed(const Model& model, const nn::Tensor& context,
                                std::span<const std::uint8_t> decoded, const StagePlan& plan,
                                std::size_t stage, std::size_t rows = 0);

/// Batch selective scan with residual output over a whole sequence.
nn::Tensor ssm_scan(const Model& model, const nn::Tensor& features);

struct ScanState {
  std::vector<double> h;
  std::size_t cursor = 0;  // number of positions consumed
};

ScanState make_scan_state(const Model& model);
/// Consumes position t (1-based); requires state.cursor == t - 1.
std::vector<double> ssm_step(const Model& model, ScanState& state, std::span<const double> feature,
                             std::size_t t);

Pmf predict_distribution(const Model& model, std::span<const double> refined);

/// Per-window predictor session. The backbone output is supplied once; each
/// predict_stage call only runs the lightweight predictor.
class WindowPredictor {
 public:
  WindowPredictor(const Model& model, nn::Tensor context, StagePlan plan,
                  InvocationCounters* counters = nullptr);

  const StagePlan& plan() const { return plan_; }
  /// Replaces the context features (fully-causal mode reruns the backbone per
  /// stage). Disables the incremental path.
  void set_context(nn::Tensor context);

  /// Distributions for the positions of `stage`, ascending. Stages must be
  /// requested in order; `decoded` must cover every earlier stage.
  std::vector<Pmf> predict_stage(std::size_t stage, std::span<const std::uint8_t> decoded);

 private:
  const Model& model_;
  nn::Tensor context_;
  StagePlan plan_;
  InvocationCounters* counters_;
  bool step_path_;
  std::size_t next_stage_ = 1;
  ScanState state_;
};

// ---- training path ---------------------------------------------------------

/// Scan output for features A + Emb(sibling) (sibling < 0 means no embedding).
nn::Var predictor_features(ParamBinder& bind, nn::Var context, std::span<const int> sibling);
nn::Var head_logits(ParamBinder& bind, nn::Var refined);

/// Sum over the window of -log2 p(o_i) under teacher forcing for the given
/// plan. `indicator_count` receives how many positions used a sibling embedding.
nn::Var window_loss_bits(ParamBinder& bind, nn::Var context, std::span<const std::uint8_t> symbols,
                         const StagePlan& plan, std::size_t* indicator_count = nullptr);

/// Bits of the positions of one stage only (fully-causal training, where the
/// context itself depends on the stage).
nn::Var stage_loss_bits(ParamBinder& bind, nn::Var context, std::span<const std::uint8_t> symbols,
                        const StagePlan& plan, std::size_t stage);

}  // namespace lpcc
