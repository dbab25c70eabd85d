#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lpcc/geometry.hpp"
#include "lpcc/model.hpp"
#include "lpcc/octree.hpp"

namespace lpcc {

struct CodecConfig {
  int depth = 16;
  std::size_t stages = 1;  // 0 = autoregressive
  std::size_t window = 1024;
  CoordMode mode = CoordMode::cylbeam;
  int direct_levels = 2;      // top levels coded with a flat model
  bool fully_causal = false;  // baseline: backbone rerun per stage
  int workers = 1;            // encoder-side window modeling threads
};

/// Fixed little-endian header preceding the coder payload.
struct FrameHeader {
  std::uint16_t version = 1;
  int depth = 16;
  int direct_levels = 2;
  std::uint32_t stages = 1;
  std::uint32_t window = 1024;
  CoordMode mode = CoordMode::cylbeam;
  bool fully_causal = false;
  QuantizationParams quant;
  std::uint64_t point_count = 0;   // accepted input points, duplicates included
  std::uint64_t unique_count = 0;  // occupied leaf cells
  std::uint64_t intrinsics_digest = 0;
  std::uint64_t config_digest = 0;
  std::uint64_t weights_digest = 0;
  std::uint64_t payload_bytes = 0;

  static constexpr std::size_t kSize = 4 + 2 + 1 + 1 + 4 + 4 + 1 + 1 + 48 + 8 * 6;

  std::vector<std::uint8_t> serialize() const;
  static FrameHeader parse(std::span<const std::uint8_t> bytes);
};

struct FrameStats {
  std::size_t input_points = 0;
  std::size_t coded_points = 0;  // accepted points (bpp denominator)
  std::size_t unique_points = 0;
  std::size_t duplicates = 0;
  std::size_t rejected_degenerate = 0;
  std::size_t rejected_out_of_volume = 0;
  std::size_t payload_bytes = 0;
  std::size_t stream_bytes = 0;
  double bpp = 0.0;         // payload bits / coded points
  double model_bits = 0.0;  // sum of -log2 quantized probability of coded symbols
  std::uint64_t backbone_calls = 0;
  std::uint64_t predictor_calls = 0;
  std::uint64_t windows = 0;  // neural-model windows over all levels
  std::uint64_t symbols = 0;
  double encode_seconds = 0.0;
  double decode_seconds = 0.0;
  std::vector<double> level_model_bits;  // per level, index 0 = level 1
  std::vector<std::size_t> level_sizes;
};

struct EncodedFrame {
  std::vector<std::uint8_t> bytes;
  FrameHeader header;
  FrameStats stats;
};

struct DecodedFrame {
  FrameHeader header;
  std::vector<GridPoint> grid;  // unique cells, Morton order
  std::vector<Point3> points;   // cell centers mapped back to Cartesian
  FrameStats stats;
};

/// Preprocesses and encodes a Cartesian scan. cylbeam mode needs intrinsics.
EncodedFrame encode_frame(std::span<const Point3> points, const SensorIntrinsics* intr, const Model& model,
                          const CodecConfig& cfg);

/// Encodes already-quantized grid coordinates.
EncodedFrame encode_grid(std::span<const GridPoint> grid, const QuantizationParams& quant,
                         const SensorIntrinsics* intr, const Model& model, const CodecConfig& cfg,
                         std::size_t point_count = 0);

DecodedFrame decode_frame(std::span<const std::uint8_t> bytes, const SensorIntrinsics* intr, const Model& model);

/// Sorted, deduplicated grid coordinates (the lossless reference).
std::vector<GridPoint> canonical_grid(std::span<const GridPoint> grid);

}  // namespace lpcc
