#include "lpcc/codec.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include "lpcc/backbone.hpp"
#include "lpcc/byte_io.hpp"
#include "lpcc/error.hpp"
#include "lpcc/predictor.hpp"
#include "lpcc/range_coder.hpp"

namespace lpcc {

namespace {

constexpr char kMagic[4] = {'L', 'P', 'C', 'C'};
constexpr std::uint16_t kFormatVersion = 1;
// Attention memory grows with the square of the window, so the format caps it.
constexpr std::size_t kMaxWindow = 4096;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Runs the entropy model over one window in coding order. `code(cdf, i)`
/// returns the symbol at window position i (0-based), either by reading it
/// (encoder) or by decoding it (decoder).
template <class CodeFn>
void model_window(const Model& model, std::span<const NodeContext> ctx, const CodecConfig& cfg,
                  InvocationCounters* counters, CodeFn&& code) {
  const std::size_t n = ctx.size();
  const StagePlan plan = decompose_stages(n, cfg.stages);
  std::vector<std::uint8_t> decoded(n, 0);

  if (!cfg.fully_causal) {
    WindowPredictor wp(model, run_backbone(model, ctx, {}, counters), plan, counters);
    for (std::size_t s = 1; s <= plan.stages; ++s) {
      const auto pmfs = wp.predict_stage(s, decoded);
      std::size_t k = 0;
      for (std::size_t p = s; p <= n; p += plan.stages, ++k) decoded[p - 1] = code(quantize_pmf(pmfs[k]), p - 1);
    }
    return;
  }

  // Baseline: decoded current-level symbols enter the backbone through the
  // causal channel (0 = masked), so the backbone reruns at every stage.
  std::vector<int> causal(n, 0);
  std::unique_ptr<WindowPredictor> wp;
  for (std::size_t s = 1; s <= plan.stages; ++s) {
    nn::Tensor a = run_backbone(model, ctx, causal, counters);
    if (!wp) {
      wp = std::make_unique<WindowPredictor>(model, a, plan, counters);
      wp->set_context(std::move(a));
    } else {
      wp->set_context(std::move(a));
    }
    const auto pmfs = wp->predict_stage(s, decoded);
    std::size_t k = 0;
    for (std::size_t p = s; p <= n; p += plan.stages, ++k) {
      const std::uint8_t sym = code(quantize_pmf(pmfs[k]), p - 1);
      decoded[p - 1] = sym;
      causal[p - 1] = sym;
    }
  }
}

struct CodedSymbol {
  QuantizedCdf cdf;
  std::uint8_t symbol;
};

void validate_config(const CodecConfig& cfg, const SensorIntrinsics* intr) {
  require(cfg.depth >= 1 && cfg.depth <= 21, ErrorKind::invalid_argument, "depth must be in [1, 21]");
  require(cfg.window >= 1 && cfg.window <= kMaxWindow, ErrorKind::invalid_argument,
          "window size must be in [1, " + std::to_string(kMaxWindow) + "]");
  require(cfg.direct_levels >= 0 && cfg.direct_levels <= cfg.depth, ErrorKind::invalid_argument,
          "direct levels must be in [0, depth]");
  require(cfg.stages <= 0xFFFFFFFFu && cfg.window <= 0xFFFFFFFFu, ErrorKind::invalid_argument,
          "stage count or window too large");
  require(cfg.mode != CoordMode::cylbeam || intr != nullptr, ErrorKind::invalid_argument,
          "cylbeam mode needs sensor intrinsics");
}

}  // namespace

std::vector<std::uint8_t> FrameHeader::serialize() const {
  ByteWriter w;
  w.raw({reinterpret_cast<const std::uint8_t*>(kMagic), sizeof(kMagic)});
  w.u16(version);
  w.u8(static_cast<std::uint8_t>(depth));
  w.u8(static_cast<std::uint8_t>(direct_levels));
  w.u32(stages);
  w.u32(window);
  w.u8(static_cast<std::uint8_t>(mode));
  w.u8(fully_causal ? 1 : 0);
  for (double s : quant.scale) w.f64(s);
  for (double o : quant.offset) w.f64(o);
  w.u64(point_count);
  w.u64(unique_count);
  w.u64(intrinsics_digest);
  w.u64(config_digest);
  w.u64(weights_digest);
  w.u64(payload_bytes);
  return w.take();
}

FrameHeader FrameHeader::parse(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= kSize, ErrorKind::truncated, "bitstream shorter than its header");
  ByteReader r(bytes);
  const auto magic = r.raw(4);
  require(std::equal(magic.begin(), magic.end(), kMagic), ErrorKind::format, "not an LPCC bitstream");
  FrameHeader h;
  h.version = r.u16();
  require(h.version == kFormatVersion, ErrorKind::format, "unsupported bitstream version " + std::to_string(h.version));
  h.depth = r.u8();
  h.direct_levels = r.u8();
  h.stages = r.u32();
  h.window = r.u32();
  const auto mode = r.u8();
  require(mode <= 2, ErrorKind::format, "unknown preprocessing mode");
  h.mode = static_cast<CoordMode>(mode);
  const auto fc = r.u8();
  require(fc <= 1, ErrorKind::format, "bad fully-causal flag");
  h.fully_causal = fc == 1;
  h.quant.depth = h.depth;
  for (double& s : h.quant.scale) s = r.f64();
  for (double& o : h.quant.offset) o = r.f64();
  h.point_count = r.u64();
  h.unique_count = r.u64();
  h.intrinsics_digest = r.u64();
  h.config_digest = r.u64();
  h.weights_digest = r.u64();
  h.payload_bytes = r.u64();

  require(h.depth >= 1 && h.depth <= 21, ErrorKind::format, "octree depth outside [1, 21]");
  require(h.direct_levels <= h.depth, ErrorKind::format, "direct levels exceed depth");
  require(h.window >= 1 && h.window <= kMaxWindow, ErrorKind::format, "window size outside the supported range");
  for (int a = 0; a < 3; ++a)
    require(std::isfinite(h.quant.scale[a]) && h.quant.scale[a] > 0.0 && std::isfinite(h.quant.offset[a]),
            ErrorKind::format, "invalid quantization parameters");
  require(h.unique_count >= 1 && h.unique_count <= h.point_count, ErrorKind::format, "inconsistent point counts");
  require(h.unique_count <= (1ull << std::min(63, 3 * h.depth)), ErrorKind::format, "more points than grid cells");
  require(bytes.size() - kSize == h.payload_bytes, bytes.size() - kSize < h.payload_bytes ? ErrorKind::truncated : ErrorKind::corrupt,
          "payload length does not match the header");
  return h;
}

std::vector<GridPoint> canonical_grid(std::span<const GridPoint> grid) {
  std::vector<GridPoint> out(grid.begin(), grid.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

EncodedFrame encode_frame(std::span<const Point3> points, const SensorIntrinsics* intr, const Model& model,
                          const CodecConfig& cfg) {
  validate_config(cfg, intr);
  const auto t0 = Clock::now();
  PreprocessResult pre = preprocess(points, cfg.mode, intr, cfg.depth);
  require(!pre.grid.empty(), ErrorKind::empty_frame, "no codable points in the frame");
  EncodedFrame out = encode_grid(pre.grid, pre.quant, intr, model, cfg, pre.grid.size());
  out.stats.input_points = points.size();
  out.stats.rejected_degenerate = pre.rejected_degenerate;
  out.stats.rejected_out_of_volume = pre.rejected_out_of_volume;
  out.stats.encode_seconds = seconds_since(t0);
  return out;
}

EncodedFrame encode_grid(std::span<const GridPoint> grid, const QuantizationParams& quant,
                         const SensorIntrinsics* intr, const Model& model, const CodecConfig& cfg,
                         std::size_t point_count) {
  validate_config(cfg, intr);
  require(quant.depth == cfg.depth, ErrorKind::invalid_argument, "quantization depth differs from codec depth");
  quant.validate();
  const auto t0 = Clock::now();
  OctreeBuildStats bstats;
  const OctreeLevels tree = build_octree(grid, cfg.depth, &bstats);

  EncodedFrame out;
  auto& st = out.stats;
  st.input_points = grid.size();
  st.coded_points = point_count ? point_count : grid.size();
  st.unique_points = bstats.unique_points;
  st.duplicates = bstats.duplicates;
  st.level_model_bits.assign(static_cast<std::size_t>(cfg.depth), 0.0);

  InvocationCounters counters;
  RangeEncoder enc;
  const QuantizedCdf flat = uniform_cdf();
  const auto generations = model.config().generations;
  const std::size_t workers = static_cast<std::size_t>(std::max(1, cfg.workers));

  for (int level = 1; level <= cfg.depth; ++level) {
    const auto symbols = tree.symbols(level);
    st.level_sizes.push_back(symbols.size());
    double& level_bits = st.level_model_bits[static_cast<std::size_t>(level - 1)];
    if (level <= cfg.direct_levels) {
      for (auto s : symbols) {
        enc.encode(flat, s);
        level_bits += flat.cost_bits(s);
      }
      continue;
    }
    const auto contexts = tree.node_contexts(level, generations);
    const auto windows = window_partition(symbols.size(), cfg.window);
    st.windows += windows.size();
    // Windows are causally independent, so their models can be evaluated in
    // parallel; coding stays in canonical order.
    for (std::size_t first = 0; first < windows.size(); first += workers) {
      const std::size_t batch = std::min(workers, windows.size() - first);
      std::vector<std::vector<CodedSymbol>> coded(batch);
      auto job = [&](std::size_t b) {
        const auto& w = windows[first + b];
        const auto ctx = std::span<const NodeContext>(contexts).subspan(w.begin, w.length);
        const auto sym = symbols.subspan(w.begin, w.length);
        coded[b].reserve(w.length);
        model_window(model, ctx, cfg, &counters, [&](const QuantizedCdf& cdf, std::size_t i) {
          coded[b].push_back({cdf, sym[i]});
          return sym[i];
        });
      };
      if (batch == 1) {
        job(0);
      } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(batch);
        for (std::size_t b = 0; b < batch; ++b)
          pool.emplace_back([&, b] {
            try {
              job(b);
            } catch (...) {
              errors[b] = std::current_exception();
            }
          });
        for (auto& t : pool) t.join();
        for (auto& e : errors)
          if (e) std::rethrow_exception(e);
      }
      for (const auto& list : coded)
        for (const auto& c : list) {
          enc.encode(c.cdf, c.symbol);
          level_bits += c.cdf.cost_bits(c.symbol);
        }
    }
  }
  std::vector<std::uint8_t> payload = enc.finish();

  FrameHeader& h = out.header;
  h.version = kFormatVersion;
  h.depth = cfg.depth;
  h.direct_levels = cfg.direct_levels;
  h.stages = static_cast<std::uint32_t>(cfg.stages);
  h.window = static_cast<std::uint32_t>(cfg.window);
  h.mode = cfg.mode;
  h.fully_causal = cfg.fully_causal;
  h.quant = quant;
  h.point_count = st.coded_points;
  h.unique_count = bstats.unique_points;
  h.intrinsics_digest = (cfg.mode == CoordMode::cylbeam && intr) ? intr->digest() : 0;
  h.config_digest = model.config().digest();
  h.weights_digest = model.weights_digest();
  h.payload_bytes = payload.size();

  out.bytes = h.serialize();
  out.bytes.insert(out.bytes.end(), payload.begin(), payload.end());

  st.payload_bytes = payload.size();
  st.stream_bytes = out.bytes.size();
  st.bpp = static_cast<double>(payload.size()) * 8.0 / static_cast<double>(st.coded_points);
  for (double b : st.level_model_bits) st.model_bits += b;
  st.backbone_calls = counters.backbone.load();
  st.predictor_calls = counters.predictor.load();
  st.symbols = tree.total_nodes();
  st.encode_seconds = seconds_since(t0);
  return out;
}

DecodedFrame decode_frame(std::span<const std::uint8_t> bytes, const SensorIntrinsics* intr, const Model& model) {
  const auto t0 = Clock::now();
  DecodedFrame out;
  const FrameHeader h = FrameHeader::parse(bytes);
  out.header = h;
  require(h.config_digest == model.config().digest(), ErrorKind::config_mismatch,
          "bitstream was produced with a different model configuration");
  require(h.weights_digest == model.weights_digest(), ErrorKind::digest_mismatch,
          "bitstream was produced with different model weights");
  if (h.mode == CoordMode::cylbeam) {
    require(intr != nullptr, ErrorKind::invalid_argument, "cylbeam bitstream needs sensor intrinsics");
    require(intr->digest() == h.intrinsics_digest, ErrorKind::digest_mismatch,
            "sensor intrinsics differ from the ones used by the encoder");
  }

  CodecConfig cfg;
  cfg.depth = h.depth;
  cfg.stages = h.stages;
  cfg.window = h.window;
  cfg.mode = h.mode;
  cfg.direct_levels = h.direct_levels;
  cfg.fully_causal = h.fully_causal;

  auto& st = out.stats;
  st.level_model_bits.assign(static_cast<std::size_t>(h.depth), 0.0);
  InvocationCounters counters;
  RangeDecoder dec(bytes.subspan(FrameHeader::kSize));
  const QuantizedCdf flat = uniform_cdf();
  const auto generations = model.config().generations;
  OctreeLevels tree(h.depth);

  for (int level = 1; level <= h.depth; ++level) {
    const std::size_t n = tree.level_size(level);
    require(n <= h.unique_count, ErrorKind::corrupt, "level larger than the point count allows");
    st.level_sizes.push_back(n);
    double& level_bits = st.level_model_bits[static_cast<std::size_t>(level - 1)];
    std::vector<std::uint8_t> symbols(n, 0);
    if (level <= h.direct_levels) {
      for (auto& s : symbols) {
        s = static_cast<std::uint8_t>(dec.decode(flat));
        level_bits += flat.cost_bits(s);
      }
    } else {
      const auto contexts = tree.node_contexts(level, generations);
      const auto windows = window_partition(n, cfg.window);
      st.windows += windows.size();
      for (const auto& w : windows) {
        const auto ctx = std::span<const NodeContext>(contexts).subspan(w.begin, w.length);
        model_window(model, ctx, cfg, &counters, [&](const QuantizedCdf& cdf, std::size_t i) {
          const auto s = static_cast<std::uint8_t>(dec.decode(cdf));
          level_bits += cdf.cost_bits(s);
          symbols[w.begin + i] = s;
          return s;
        });
      }
    }
    tree.append_level(std::move(symbols));
  }
  dec.finish();

  out.grid = tree.reconstruct_points();
  require(out.grid.size() == h.unique_count, ErrorKind::corrupt, "decoded point count differs from the header");
  out.points.reserve(out.grid.size());
  for (const auto& g : out.grid) out.points.push_back(postprocess(g, h.quant, h.mode, intr));

  st.coded_points = h.point_count;
  st.unique_points = out.grid.size();
  st.payload_bytes = h.payload_bytes;
  st.stream_bytes = bytes.size();
  st.bpp = static_cast<double>(h.payload_bytes) * 8.0 / static_cast<double>(h.point_count);
  for (double b : st.level_model_bits) st.model_bits += b;
  st.backbone_calls = counters.backbone.load();
  st.predictor_calls = counters.predictor.load();
  st.symbols = tree.total_nodes();
  st.decode_seconds = seconds_since(t0);
  return out;
}

}  // namespace lpcc
