#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "lpcc/codec.hpp"
#include "lpcc/metrics.hpp"

namespace lpcc {

struct BenchFrame {
  std::string name;
  std::vector<Point3> points;
};

struct BenchConfig {
  CoordMode mode = CoordMode::cylbeam;
  const SensorIntrinsics* intrinsics = nullptr;
  std::vector<int> depths{12};
  std::vector<std::size_t> stage_set{1, 2, 4, 8, 16, 0};  // 0 = autoregressive
  bool post_causal = true;
  bool fully_causal = false;
  std::size_t window = 1024;
  int direct_levels = 2;
  int workers = 1;  // frames coded concurrently
  double peak = kPeakKitti;
  bool compute_psnr = true;
};

/// One (mode, S, L) cell aggregated over the corpus.
struct BenchRow {
  std::string mode;  // "post-causal" or "fully-causal"
  std::size_t stages = 1;
  int depth = 12;
  std::size_t frames = 0;
  std::size_t points = 0;  // coded points over all frames
  std::size_t payload_bytes = 0;
  double bpp = 0.0;      // payload bits / coded points
  double ce_bpp = 0.0;   // quantized model bits / coded points
  double d1_psnr = 0.0;  // mean over frames, sentinel for lossless
  double encode_seconds = 0.0;
  double decode_seconds = 0.0;
  std::uint64_t backbone_calls = 0;
  std::uint64_t predictor_calls = 0;
  std::size_t lossless_frames = 0;
  bool failed = false;
  std::string error;

  RDPoint rd() const { return {bpp, d1_psnr}; }
};

struct BenchReport {
  std::vector<BenchRow> rows;
  nlohmann::json metadata;
  bool any_failed() const;

  std::string to_csv() const;
  nlohmann::json to_json() const;
};

/// Encodes and decodes every frame for each configured cell, verifying the
/// round trip against the quantized input.
BenchReport run_bench(const std::vector<BenchFrame>& corpus, const Model& model, const BenchConfig& cfg);

}  // namespace lpcc
