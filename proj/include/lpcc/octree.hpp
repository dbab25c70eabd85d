#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lpcc/geometry.hpp"

namespace lpcc {

/// Child octant index inside a node: bit 2 = x, bit 1 = y, bit 0 = z. Part of
/// the bitstream format.
inline int octant_of(std::uint32_t x_bit, std::uint32_t y_bit, std::uint32_t z_bit) {
  return static_cast<int>((x_bit << 2) | (y_bit << 1) | z_bit);
}

/// Symbol 0 never occurs as an occupancy code; it pads ancestor chains above
/// the root and marks "not yet decoded" in partially known sequences.
inline constexpr std::uint8_t kPadSymbol = 0;

struct NodeContext {
  std::uint8_t octant = 0;                // position inside the parent, 0 for the root
  int level = 1;                          // 1-based
  std::vector<std::uint8_t> ancestors;    // nearest generation first
  std::array<double, 3> coords{};         // node center mapped to [-1, 1]^3
};

/// Level-wise breadth-first occupancy sequences.
///
/// Levels are appended one at a time, which is how the decoder grows the tree:
/// the node layout of level l (and therefore its contexts) depends only on
/// levels < l.
class OctreeLevels {
 public:
  explicit OctreeLevels(int depth);

  int depth() const { return depth_; }
  /// Number of levels whose symbols are known.
  int levels_known() const { return static_cast<int>(symbols_.size()); }
  /// N_l; available once levels < l are known.
  std::size_t level_size(int level) const;
  std::span<const std::uint8_t> symbols(int level) const;

  /// Appends level `levels_known() + 1`. Throws corrupt on a zero symbol or a
  /// size that disagrees with the previous level's child count.
  void append_level(std::vector<std::uint8_t> symbols);

  /// Contexts for every node of `level`; requires levels < level to be known.
  std::vector<NodeContext> node_contexts(int level, int generations) const;

  /// Expands the leaves of a complete tree into grid coordinates, in
  /// ascending Morton order.
  std::vector<GridPoint> reconstruct_points() const;

  std::size_t total_nodes() const;

 private:
  int depth_;
  std::vector<std::vector<std::uint8_t>> symbols_;
  // prefixes_[l-1][i]: Morton prefix (3*(l-1) bits) of node i at level l.
  std::vector<std::vector<std::uint64_t>> prefixes_;
  // parents_[l-1][i]: index of the parent at level l-1 (unused for l = 1).
  std::vector<std::vector<std::uint32_t>> parents_;
};

struct OctreeBuildStats {
  std::size_t input_points = 0;
  std::size_t unique_points = 0;
  std::size_t duplicates = 0;
};

/// Builds the occupancy levels for a quantized cloud (duplicates are merged).
/// Throws empty_frame for no points and out_of_range for coordinates >= 2^L.
OctreeLevels build_octree(std::span<const GridPoint> points, int depth,
                          OctreeBuildStats* stats = nullptr);

std::uint64_t morton_encode(const GridPoint& g, int depth);
GridPoint morton_decode(std::uint64_t key, int depth);

/// A contiguous run of one level's sequence.
struct WindowSpan {
  std::size_t index = 1;  // 1-based window number m
  std::size_t begin = 0;  // 0-based offset into the level sequence
  std::size_t length = 0;
};

/// ceil(n / W) windows; only the last may be shorter than W.
std::vector<WindowSpan> window_partition(std::size_t sequence_length, std::size_t window);

/// Window payload handed to the entropy model.
struct Window {
  int level = 1;
  std::size_t index = 1;
  std::span<const std::uint8_t> symbols;  // empty on the decoder side
  std::span<const NodeContext> contexts;
};

}  // namespace lpcc
