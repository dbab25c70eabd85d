#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lpcc/codec.hpp"
#include "lpcc/model.hpp"
#include "lpcc/optim.hpp"
#include "lpcc/predictor.hpp"

namespace lpcc {

/// Stage-set entry meaning "one stage per position" (autoregressive).
inline constexpr std::size_t kStagesAutoregressive = 0;

struct TrainConfig {
  double learning_rate = 5e-4;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  int epochs = 1;
  std::size_t max_steps = 0;  // 0 = run all epochs
  std::size_t batch_windows = 4;
  std::vector<std::size_t> stage_set{1, 2, 4, kStagesAutoregressive};
  std::size_t window = 1024;
  int direct_levels = 2;
  std::uint64_t seed = 1;
  /// Share of steps spent on the causal input channel of the fully-causal
  /// baseline (0 disables it).
  double causal_fraction = 0.0;
  std::size_t checkpoint_every = 0;  // steps; 0 = never
  std::filesystem::path checkpoint_path;
  std::filesystem::path log_path;  // line-delimited JSON; empty = none

  void validate() const;
};

/// One window of one level with its ground truth.
struct TrainingWindow {
  int level = 1;
  std::vector<NodeContext> contexts;
  std::vector<std::uint8_t> symbols;
};

/// Windows of every modeled level (levels above `direct_levels`).
std::vector<TrainingWindow> collect_windows(const OctreeLevels& tree, int generations, std::size_t window,
                                            int direct_levels);

/// Preprocesses and voxelizes a scan, then collects its windows.
std::vector<TrainingWindow> frame_windows(std::span<const Point3> points, const SensorIntrinsics* intr,
                                          const CodecConfig& codec, int generations, int direct_levels);

/// Mean of -log2 p(symbol). Zero probabilities are clamped to 1e-12 and
/// reported through `clamped`.
double cross_entropy_bits(std::span<const Pmf> distributions, std::span<const std::uint8_t> symbols,
                          bool* clamped = nullptr);

struct StepResult {
  bool ok = true;
  std::string error;  // set when the step was aborted
  double loss_bits = 0.0;  // mean bits per symbol over the batch
  std::size_t stages = 1;  // sampled S (0 = autoregressive)
  bool causal_step = false;
  double grad_norm = 0.0;
  std::size_t symbols = 0;
  std::size_t indicators = 0;  // positions that used a sibling embedding
};

struct TrainReport {
  std::size_t steps = 0;
  std::size_t aborted = 0;
  double first_loss = 0.0;
  double last_loss = 0.0;
  std::vector<StepResult> history;
};

class Trainer {
 public:
  Trainer(Model& model, TrainConfig cfg);

  /// Forward (backbone once per window, predictor per stage of `stages`),
  /// backward, clip and AdamW update. A non-finite loss or gradient aborts
  /// the step without touching the weights.
  StepResult step(std::span<const TrainingWindow* const> batch, std::size_t stages);

  /// Fully-causal variant: each window gets stage `stage` (clamped per window)
  /// of an S-stage plan, with earlier stages fed through the causal channel.
  StepResult causal_step(std::span<const TrainingWindow* const> batch, std::size_t stages, std::size_t stage);

  /// Mixed-stage training over the corpus with seed-determined shuffling and
  /// uniform stage sampling.
  TrainReport fit(std::span<const TrainingWindow> corpus);

  /// Mean teacher-forced bits per symbol without updating the weights.
  double evaluate(std::span<const TrainingWindow> corpus, std::size_t stages) const;

  const TrainConfig& config() const { return cfg_; }
  std::size_t steps_taken() const { return steps_; }

 private:
  Model& model_;
  TrainConfig cfg_;
  std::vector<nn::Parameter*> params_;         // all but the causal table
  std::vector<nn::Parameter*> causal_params_;  // the causal table alone
  nn::AdamW opt_;
  nn::AdamW causal_opt_;
  std::size_t steps_ = 0;

  StepResult finish_step(StepResult r, nn::Graph& g, nn::Var total, std::size_t symbols);
};

}  // namespace lpcc
