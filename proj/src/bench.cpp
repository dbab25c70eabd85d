#include "lpcc/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <sstream>
#include <thread>

#include "lpcc/error.hpp"

namespace lpcc {

namespace {

struct FrameOutcome {
  bool lossless = false;
  std::string error;
  FrameStats stats;
  double psnr = 0.0;
};

FrameOutcome run_frame(const BenchFrame& frame, const Model& model, const CodecConfig& codec,
                       const BenchConfig& cfg) {
  FrameOutcome out;
  try {
    const auto pre = preprocess(frame.points, codec.mode, cfg.intrinsics, codec.depth);
    const EncodedFrame enc = encode_frame(frame.points, cfg.intrinsics, model, codec);
    const DecodedFrame dec = decode_frame(enc.bytes, cfg.intrinsics, model);
    out.stats = enc.stats;
    out.stats.decode_seconds = dec.stats.decode_seconds;
    out.stats.backbone_calls = dec.stats.backbone_calls;
    out.stats.predictor_calls = dec.stats.predictor_calls;
    out.lossless = canonical_grid(dec.grid) == canonical_grid(pre.grid);
    if (!out.lossless) out.error = frame.name + ": decoded grid differs from the quantized input";
    if (cfg.compute_psnr) out.psnr = report_psnr(d1_psnr(frame.points, dec.points, cfg.peak).psnr);
  } catch (const std::exception& e) {
    out.error = frame.name + ": " + e.what();
  }
  return out;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

bool BenchReport::any_failed() const {
  return std::any_of(rows.begin(), rows.end(), [](const BenchRow& r) { return r.failed; });
}

BenchReport run_bench(const std::vector<BenchFrame>& corpus, const Model& model, const BenchConfig& cfg) {
  require(!corpus.empty(), ErrorKind::invalid_argument, "empty bench corpus");
  require(cfg.post_causal || cfg.fully_causal, ErrorKind::invalid_argument, "no modeling mode selected");
  BenchReport report;
  report.metadata = {{"coord_mode", to_string(cfg.mode)},
                     {"window", cfg.window},
                     {"direct_levels", cfg.direct_levels},
                     {"workers", cfg.workers},
                     {"peak", cfg.peak},
                     {"frames", corpus.size()},
                     {"weights_digest", model.weights_digest()},
                     {"config_digest", model.config().digest()},
                     {"hardware_threads", std::thread::hardware_concurrency()}};

  std::vector<bool> modes;
  if (cfg.post_causal) modes.push_back(false);
  if (cfg.fully_causal) modes.push_back(true);
  for (bool fully : modes)
    for (int depth : cfg.depths)
      for (std::size_t stages : cfg.stage_set) {
        CodecConfig codec;
        codec.depth = depth;
        codec.stages = stages;
        codec.window = cfg.window;
        codec.mode = cfg.mode;
        codec.direct_levels = std::min(cfg.direct_levels, depth);
        codec.fully_causal = fully;

        std::vector<FrameOutcome> outcomes(corpus.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
          for (std::size_t i = next++; i < corpus.size(); i = next++)
            outcomes[i] = run_frame(corpus[i], model, codec, cfg);
        };
        const auto threads = static_cast<std::size_t>(std::max(1, cfg.workers));
        if (threads == 1) {
          worker();
        } else {
          std::vector<std::thread> pool;
          for (std::size_t t = 0; t < std::min(threads, corpus.size()); ++t) pool.emplace_back(worker);
          for (auto& t : pool) t.join();
        }

        BenchRow row;
        row.mode = fully ? "fully-causal" : "post-causal";
        row.stages = stages;
        row.depth = depth;
        row.frames = corpus.size();
        double model_bits = 0.0;
        double psnr_sum = 0.0;
        for (const auto& o : outcomes) {
          if (!o.error.empty()) {
            row.failed = true;
            if (row.error.empty()) row.error = o.error;
          }
          if (o.lossless) ++row.lossless_frames;
          row.points += o.stats.coded_points;
          row.payload_bytes += o.stats.payload_bytes;
          model_bits += o.stats.model_bits;
          psnr_sum += o.psnr;
          row.encode_seconds += o.stats.encode_seconds;
          row.decode_seconds += o.stats.decode_seconds;
          row.backbone_calls += o.stats.backbone_calls;
          row.predictor_calls += o.stats.predictor_calls;
        }
        if (row.points > 0) {
          row.bpp = 8.0 * static_cast<double>(row.payload_bytes) / static_cast<double>(row.points);
          row.ce_bpp = model_bits / static_cast<double>(row.points);
        }
        row.d1_psnr = psnr_sum / static_cast<double>(corpus.size());
        report.rows.push_back(std::move(row));
      }
  return report;
}

std::string BenchReport::to_csv() const {
  std::ostringstream out;
  out << "mode,stages,depth,frames,points,payload_bytes,bpp,ce_bpp,d1_psnr,encode_seconds,decode_seconds,"
         "backbone_calls,predictor_calls,lossless_frames,failed,error\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    out << r.mode << ',' << (r.stages == 0 ? std::string("AR") : std::to_string(r.stages)) << ',' << r.depth << ','
        << r.frames << ',' << r.points << ',' << r.payload_bytes << ',' << num(r.bpp) << ',' << num(r.ce_bpp) << ','
        << num(r.d1_psnr) << ',' << num(r.encode_seconds) << ',' << num(r.decode_seconds) << ','
        << r.backbone_calls << ',' << r.predictor_calls << ',' << r.lossless_frames << ',' << (r.failed ? 1 : 0)
        << ',' << csv_escape(r.error) << '\n';
  }
  return out.str();
}

nlohmann::json BenchReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"mode", r.mode},
                         {"stages", r.stages == 0 ? nlohmann::json("AR") : nlohmann::json(r.stages)},
                         {"depth", r.depth},
                         {"frames", r.frames},
                         {"points", r.points},
                         {"payload_bytes", r.payload_bytes},
                         {"bpp", r.bpp},
                         {"ce_bpp", r.ce_bpp},
                         {"d1_psnr", r.d1_psnr},
                         {"encode_seconds", r.encode_seconds},
                         {"decode_seconds", r.decode_seconds},
                         {"backbone_calls", r.backbone_calls},
                         {"predictor_calls", r.predictor_calls},
                         {"lossless_frames", r.lossless_frames},
                         {"failed", r.failed},
                         {"error", r.error}});
  }
  return {{"metadata", metadata}, {"rows", rows_json}};
}

}  // namespace lpcc
