#include "lpcc/octree.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "lpcc/error.hpp"

namespace lpcc {

OctreeLevels::OctreeLevels(int depth) : depth_(depth) {
  require(depth >= 1 && depth <= 21, ErrorKind::invalid_argument, "octree depth must be in [1, 21]");
  prefixes_.push_back({0});
  parents_.push_back({0});
}

std::size_t OctreeLevels::level_size(int level) const {
  require(level >= 1 && level <= depth_ && level <= levels_known() + 1, ErrorKind::usage,
          "level " + std::to_string(level) + " is not yet determined");
  return prefixes_[static_cast<std::size_t>(level - 1)].size();
}

std::span<const std::uint8_t> OctreeLevels::symbols(int level) const {
  require(level >= 1 && level <= levels_known(), ErrorKind::usage,
          "symbols of level " + std::to_string(level) + " are not known");
  return symbols_[static_cast<std::size_t>(level - 1)];
}

void OctreeLevels::append_level(std::vector<std::uint8_t> symbols) {
  const int level = levels_known() + 1;
  require(level <= depth_, ErrorKind::corrupt, "more levels than the octree depth");
  const auto& prefixes = prefixes_[static_cast<std::size_t>(level - 1)];
  require(symbols.size() == prefixes.size(), ErrorKind::corrupt,
          "level " + std::to_string(level) + " has " + std::to_string(symbols.size()) +
              " symbols, expected " + std::to_string(prefixes.size()));
  std::size_t children = 0;
  for (auto s : symbols) {
    require(s != 0, ErrorKind::corrupt, "occupancy code 0 in a non-empty node");
    children += static_cast<std::size_t>(std::popcount(s));
  }
  if (level < depth_) {
    std::vector<std::uint64_t> next;
    std::vector<std::uint32_t> parent;
    next.reserve(children);
    parent.reserve(children);
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      for (int k = 0; k < 8; ++k) {
        if (symbols[i] & (1u << k)) {
          next.push_back((prefixes[i] << 3) | static_cast<std::uint64_t>(k));
          parent.push_back(static_cast<std::uint32_t>(i));
        }
      }
    }
    prefixes_.push_back(std::move(next));
    parents_.push_back(std::move(parent));
  }
  symbols_.push_back(std::move(symbols));
}

std::vector<NodeContext> OctreeLevels::node_contexts(int level, int generations) const {
  require(generations >= 0, ErrorKind::invalid_argument, "negative ancestor generations");
  const std::size_t n = level_size(level);
  const auto& prefixes = prefixes_[static_cast<std::size_t>(level - 1)];
  const int digits = level - 1;
  const double cells = static_cast<double>(1ull << digits);
  std::vector<NodeContext> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& ctx = out[i];
    ctx.level = level;
    ctx.octant = level == 1 ? 0 : static_cast<std::uint8_t>(prefixes[i] & 7u);
    ctx.ancestors.assign(static_cast<std::size_t>(generations), kPadSymbol);
    std::size_t idx = i;
    for (int g = 1; g <= generations; ++g) {
      const int anc_level = level - g;
      if (anc_level < 1) break;
      idx = parents_[static_cast<std::size_t>(anc_level)][idx];
      ctx.ancestors[static_cast<std::size_t>(g - 1)] =
          symbols_[static_cast<std::size_t>(anc_level - 1)][idx];
    }
    const GridPoint origin = digits == 0 ? GridPoint{0, 0, 0} : morton_decode(prefixes[i], digits);
    for (int a = 0; a < 3; ++a)
      ctx.coords[static_cast<std::size_t>(a)] = (static_cast<double>(origin[a]) + 0.5) / cells * 2.0 - 1.0;
  }
  return out;
}

std::vector<GridPoint> OctreeLevels::reconstruct_points() const {
  require(levels_known() == depth_, ErrorKind::corrupt, "octree is incomplete");
  const auto& prefixes = prefixes_.back();
  const auto& last = symbols_.back();
  std::vector<GridPoint> out;
  for (std::size_t i = 0; i < last.size(); ++i) {
    for (int k = 0; k < 8; ++k) {
      if (last[i] & (1u << k))
        out.push_back(morton_decode((prefixes[i] << 3) | static_cast<std::uint64_t>(k), depth_));
    }
  }
  return out;
}

std::size_t OctreeLevels::total_nodes() const {
  std::size_t n = 0;
  for (const auto& s : symbols_) n += s.size();
  return n;
}

std::uint64_t morton_encode(const GridPoint& g, int depth) {
  std::uint64_t key = 0;
  for (int b = depth - 1; b >= 0; --b) {
    key = (key << 3) | static_cast<std::uint64_t>(
                           octant_of((g[0] >> b) & 1u, (g[1] >> b) & 1u, (g[2] >> b) & 1u));
  }
  return key;
}

GridPoint morton_decode(std::uint64_t key, int depth) {
  GridPoint g{0, 0, 0};
  for (int b = 0; b < depth; ++b) {
    const auto digit = static_cast<std::uint32_t>((key >> (3 * b)) & 7u);
    g[0] |= ((digit >> 2) & 1u) << b;
    g[1] |= ((digit >> 1) & 1u) << b;
    g[2] |= (digit & 1u) << b;
  }
  return g;
}

OctreeLevels build_octree(std::span<const GridPoint> points, int depth, OctreeBuildStats* stats) {
  require(!points.empty(), ErrorKind::empty_frame, "no points to encode");
  OctreeLevels tree(depth);
  const std::uint64_t limit = 1ull << depth;
  std::vector<std::uint64_t> keys;
  keys.reserve(points.size());
  for (const auto& p : points) {
    require(p[0] < limit && p[1] < limit && p[2] < limit, ErrorKind::out_of_range,
            "grid coordinate exceeds 2^L - 1");
    keys.push_back(morton_encode(p, depth));
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  if (stats) {
    stats->input_points = points.size();
    stats->unique_points = keys.size();
    stats->duplicates = points.size() - keys.size();
  }

  for (int level = 1; level <= depth; ++level) {
    const int shift = 3 * (depth - level);
    std::vector<std::uint8_t> symbols;
    std::uint64_t current = ~0ull;
    for (auto key : keys) {
      const std::uint64_t node = (shift + 3 >= 64) ? 0 : key >> (shift + 3);
      const auto bit = static_cast<std::uint8_t>(1u << ((key >> shift) & 7u));
      if (symbols.empty() || node != current) {
        symbols.push_back(bit);
        current = node;
      } else {
        symbols.back() |= bit;
      }
    }
    tree.append_level(std::move(symbols));
  }
  return tree;
}

std::vector<WindowSpan> window_partition(std::size_t sequence_length, std::size_t window) {
  require(window >= 1, ErrorKind::invalid_argument, "window size must be >= 1");
  std::vector<WindowSpan> out;
  out.reserve((sequence_length + window - 1) / window);
  for (std::size_t begin = 0, m = 1; begin < sequence_length; begin += window, ++m)
    out.push_back({m, begin, std::min(window, sequence_length - begin)});
  return out;
}

}  // namespace lpcc
