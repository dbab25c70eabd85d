// Command-line front end: encode, decode, train, bench, metrics, plus helpers
// for generating synthetic scans and dumping the built-in calibrations.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lpcc/bench.hpp"
#include "lpcc/codec.hpp"
#include "lpcc/error.hpp"
#include "lpcc/metrics.hpp"
#include "lpcc/scan_io.hpp"
#include "lpcc/synthetic.hpp"
#include "lpcc/trainer.hpp"

namespace fs = std::filesystem;
using namespace lpcc;

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::round_trip:
      return 2;
    case ErrorKind::format:
    case ErrorKind::corrupt:
    case ErrorKind::truncated:
      return 3;
    case ErrorKind::config_mismatch:
    case ErrorKind::digest_mismatch:
      return 4;
    default:
      return 1;
  }
}

std::optional<SensorIntrinsics> resolve_intrinsics(const std::string& source) {
  if (source.empty() || source == "none") return std::nullopt;
  if (source == "ford") return ford_intrinsics();
  if (source == "qnx") return qnx_intrinsics();
  return SensorIntrinsics::load(source);
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorKind::io, "failed writing " + path.string());
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorKind::io, "cannot open " + path + " for writing");
  out << text;
}

void save_points(const fs::path& path, const std::vector<Point3>& points) {
  const auto ext = path.extension().string();
  if (ext == ".bin") {
    save_kitti_bin(path, points);
  } else {
    save_ply(path, points, true);
  }
}

// Accepts "1,2,4,W" / "AR"; W and AR mean one stage per position.
std::vector<std::size_t> parse_stage_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "W" || item == "AR" || item == "0") {
      out.push_back(kStagesAutoregressive);
    } else {
      try {
        std::size_t used = 0;
        const unsigned long v = std::stoul(item, &used);
        require(used == item.size() && v > 0, ErrorKind::invalid_argument, "bad stage count '" + item + "'");
        out.push_back(v);
      } catch (const std::logic_error&) {
        fail(ErrorKind::invalid_argument, "bad stage count '" + item + "'");
      }
    }
  }
  require(!out.empty(), ErrorKind::invalid_argument, "empty stage list");
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::logic_error&) {
      fail(ErrorKind::invalid_argument, "bad integer '" + item + "'");
    }
  }
  require(!out.empty(), ErrorKind::invalid_argument, "empty list");
  return out;
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(in)) {
        const auto ext = e.path().extension().string();
        if (e.is_regular_file() && (ext == ".bin" || ext == ".ply")) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      out.insert(out.end(), files.begin(), files.end());
    } else {
      out.emplace_back(in);
    }
  }
  require(!out.empty(), ErrorKind::invalid_argument, "no input scans");
  return out;
}

struct CodecOptions {
  std::string intrinsics;
  std::string mode = "cylbeam";
  int depth = 16;
  std::string stages = "1";
  std::size_t window = 1024;
  int direct_levels = 2;
  bool fully_causal = false;
  int workers = 1;
};

void add_codec_options(CLI::App* cmd, CodecOptions& o) {
  cmd->add_option("--intrinsics", o.intrinsics, "Calibration JSON, or 'ford' / 'qnx'");
  cmd->add_option("--mode", o.mode, "Coordinate mode")->check(CLI::IsMember({"cylbeam", "spherical", "cartesian"}));
  cmd->add_option("--depth", o.depth, "Octree depth L")->check(CLI::Range(1, 21));
  cmd->add_option("--stages", o.stages, "Stage count S (0 or AR = autoregressive)");
  cmd->add_option("--window", o.window, "Window size W");
  cmd->add_option("--direct-levels", o.direct_levels, "Top levels coded with a flat model");
  cmd->add_flag("--baseline-fully-causal", o.fully_causal, "Rerun the backbone per stage");
  cmd->add_option("--workers", o.workers, "Worker threads")->check(CLI::Range(1, 256));
}

CodecConfig make_codec(const CodecOptions& o) {
  CodecConfig c;
  c.mode = parse_coord_mode(o.mode);
  c.depth = o.depth;
  const auto s = parse_stage_list(o.stages);
  require(s.size() == 1, ErrorKind::invalid_argument, "--stages takes a single value");
  c.stages = s[0];
  c.window = o.window;
  c.direct_levels = std::min(o.direct_levels, o.depth);
  c.fully_causal = o.fully_causal;
  c.workers = o.workers;
  return c;
}

nlohmann::json stats_json(const FrameStats& s) {
  return {{"input_points", s.input_points},
          {"coded_points", s.coded_points},
          {"unique_points", s.unique_points},
          {"duplicates", s.duplicates},
          {"rejected_degenerate", s.rejected_degenerate},
          {"rejected_out_of_volume", s.rejected_out_of_volume},
          {"payload_bytes", s.payload_bytes},
          {"stream_bytes", s.stream_bytes},
          {"bpp", s.bpp},
          {"model_bits", s.model_bits},
          {"backbone_calls", s.backbone_calls},
          {"predictor_calls", s.predictor_calls},
          {"windows", s.windows},
          {"symbols", s.symbols},
          {"encode_seconds", s.encode_seconds},
          {"decode_seconds", s.decode_seconds}};
}

std::string stats_csv(const FrameStats& s) {
  const auto j = stats_json(s);
  std::string head, vals;
  for (auto it = j.begin(); it != j.end(); ++it) {
    head += (head.empty() ? "" : ",") + it.key();
    vals += (vals.empty() ? "" : ",") + it.value().dump();
  }
  return head + "\n" + vals + "\n";
}

void emit_stats(const FrameStats& s, const std::string& format) {
  if (format == "json") {
    std::cout << stats_json(s).dump(2) << "\n";
  } else if (format == "csv") {
    std::cout << stats_csv(s);
  }
}

struct ModelOptions {
  int embed_dim = 128;
  int layers = 3;
  int heads = 4;
  int ffn_dim = 256;
  int neighbors = 8;
  int generations = 3;
  int head_hidden = 128;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned octree geometry codec for spinning-LiDAR point clouds"};
  app.require_subcommand(1);

  // encode
  std::string input, output, checkpoint, report;
  std::uint64_t seed = 1;
  bool verify = false;
  CodecOptions codec;
  auto* enc = app.add_subcommand("encode", "Compress a scan (.bin or .ply)");
  enc->add_option("--input", input, "Scan file")->required();
  enc->add_option("--output", output, "Bitstream path")->required();
  enc->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  enc->add_option("--report", report, "Print frame statistics")->check(CLI::IsMember({"csv", "json"}));
  enc->add_flag("--verify", verify, "Decode again and compare with the quantized input");
  add_codec_options(enc, codec);

  // decode
  std::string dec_intrinsics;
  auto* dec = app.add_subcommand("decode", "Decompress a bitstream into a point cloud");
  dec->add_option("--input", input, "Bitstream path")->required();
  dec->add_option("--output", output, "Output scan (.ply or .bin)")->required();
  dec->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  dec->add_option("--intrinsics", dec_intrinsics, "Calibration JSON, or 'ford' / 'qnx'");
  dec->add_option("--report", report, "Print frame statistics")->check(CLI::IsMember({"csv", "json"}));

  // train
  std::vector<std::string> inputs;
  int synthetic_frames = 0;
  std::string stage_set = "1,2,4,W", log_path, init;
  TrainConfig tc;
  ModelOptions mo;
  CodecOptions train_codec;
  train_codec.depth = 12;
  auto* train = app.add_subcommand("train", "Train a model on scans or on generated scenes");
  train->add_option("--input", inputs, "Scan files or directories");
  train->add_option("--synthetic", synthetic_frames, "Generate this many synthetic scans instead");
  train->add_option("--output", output, "Checkpoint to write")->required();
  train->add_option("--checkpoint", init, "Start from this checkpoint");
  train->add_option("--epochs", tc.epochs, "Passes over the corpus");
  train->add_option("--steps", tc.max_steps, "Stop after this many steps (overrides --epochs)");
  train->add_option("--batch", tc.batch_windows, "Windows per step");
  train->add_option("--lr", tc.learning_rate, "Learning rate");
  train->add_option("--stage-set", stage_set, "Sampled stage counts, W = autoregressive");
  train->add_option("--causal-fraction", tc.causal_fraction, "Share of steps training the fully-causal channel");
  train->add_option("--seed", seed, "Seed for initialization, sampling and synthetic data");
  train->add_option("--log", log_path, "Line-delimited JSON training log");
  train->add_option("--checkpoint-every", tc.checkpoint_every, "Save every N steps");
  train->add_option("--embed-dim", mo.embed_dim);
  train->add_option("--layers", mo.layers);
  train->add_option("--heads", mo.heads);
  train->add_option("--ffn-dim", mo.ffn_dim);
  train->add_option("--neighbors", mo.neighbors);
  train->add_option("--generations", mo.generations);
  train->add_option("--head-hidden", mo.head_hidden);
  add_codec_options(train, train_codec);

  // bench
  std::string depths = "12", bench_stages = "1,2,4,8,16,AR";
  double peak = kPeakKitti;
  CodecOptions bench_codec;
  auto* bench = app.add_subcommand("bench", "Sweep stage counts and depths, verifying every round trip");
  bench->add_option("--input", inputs, "Scan files or directories")->required();
  bench->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  bench->add_option("--stage-set", bench_stages, "Stage counts to sweep");
  bench->add_option("--depths", depths, "Depths to sweep, e.g. 8,12,16");
  bench->add_option("--peak", peak, "D1 PSNR peak");
  bench->add_option("--report", report, "Report format")->check(CLI::IsMember({"csv", "json"}));
  bench->add_option("--output", output, "Report path (default: stdout)");
  add_codec_options(bench, bench_codec);

  // metrics
  std::string other, curve_a, curve_b;
  auto* metrics = app.add_subcommand("metrics", "D1 PSNR between two clouds, or BD-BR between two RD curves");
  metrics->add_option("--input", input, "Original cloud");
  metrics->add_option("--other", other, "Reconstructed cloud");
  metrics->add_option("--peak", peak, "D1 PSNR peak");
  metrics->add_option("--curve-a", curve_a, "CSV of bpp,psnr rows (anchor)");
  metrics->add_option("--curve-b", curve_b, "CSV of bpp,psnr rows (test)");

  // synth
  std::string synth_intr = "ford";
  SceneConfig scene;
  auto* synth = app.add_subcommand("synth", "Write a ray-cast synthetic scan");
  synth->add_option("--output", output, "Scan path (.bin or .ply)")->required();
  synth->add_option("--intrinsics", synth_intr, "Calibration JSON, or 'ford' / 'qnx'");
  synth->add_option("--azimuth-steps", scene.azimuth_steps);
  synth->add_option("--unit", scene.unit, "Sensor units per meter");
  synth->add_option("--seed", seed);

  // intrinsics
  std::string which;
  auto* intr_cmd = app.add_subcommand("intrinsics", "Print a built-in calibration as JSON");
  intr_cmd->add_option("name", which, "ford or qnx")->required()->check(CLI::IsMember({"ford", "qnx"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*enc) {
      const auto intr = resolve_intrinsics(codec.intrinsics);
      const Model model = Model::load(checkpoint);
      const CodecConfig cfg = make_codec(codec);
      const auto points = load_scan(input);
      const EncodedFrame frame = encode_frame(points, intr ? &*intr : nullptr, model, cfg);
      write_bytes(output, frame.bytes);
      if (verify) {
        const auto pre = preprocess(points, cfg.mode, intr ? &*intr : nullptr, cfg.depth);
        const DecodedFrame back = decode_frame(frame.bytes, intr ? &*intr : nullptr, model);
        require(canonical_grid(back.grid) == canonical_grid(pre.grid), ErrorKind::round_trip,
                "decoded grid differs from the quantized input");
      }
      emit_stats(frame.stats, report);
    } else if (*dec) {
      const auto intr = resolve_intrinsics(dec_intrinsics);
      const Model model = Model::load(checkpoint);
      const DecodedFrame frame = decode_frame(read_bytes(input), intr ? &*intr : nullptr, model);
      save_points(output, frame.points);
      emit_stats(frame.stats, report);
    } else if (*train) {
      const auto intr = resolve_intrinsics(train_codec.intrinsics);
      const CodecConfig cfg = make_codec(train_codec);
      ModelConfig mc;
      mc.embed_dim = mo.embed_dim;
      mc.attention_layers = mo.layers;
      mc.heads = mo.heads;
      mc.ffn_dim = mo.ffn_dim;
      mc.neighbors = mo.neighbors;
      mc.generations = mo.generations;
      mc.head_hidden = mo.head_hidden;
      Model model = init.empty() ? Model(mc, seed) : Model::load(init);
      tc.stage_set = parse_stage_list(stage_set);
      tc.window = cfg.window;
      tc.direct_levels = cfg.direct_levels;
      tc.seed = seed;
      tc.checkpoint_path = output;
      tc.log_path = log_path;
      std::vector<TrainingWindow> corpus;
      const int generations = model.config().generations;
      auto add = [&](const std::vector<Point3>& pts) {
        auto w = frame_windows(pts, intr ? &*intr : nullptr, cfg, generations, cfg.direct_levels);
        corpus.insert(corpus.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
      };
      if (synthetic_frames > 0) {
        require(intr.has_value(), ErrorKind::invalid_argument, "--synthetic needs --intrinsics");
        for (int f = 0; f < synthetic_frames; ++f) add(synthetic_scan(*intr, scene, seed * 1000003u + f));
      } else {
        for (const auto& p : expand_inputs(inputs)) add(load_scan(p));
      }
      Trainer trainer(model, tc);
      const TrainReport rep = trainer.fit(corpus);
      std::cout << nlohmann::json{{"windows", corpus.size()},
                                  {"steps", rep.steps},
                                  {"aborted", rep.aborted},
                                  {"first_loss_bits", rep.first_loss},
                                  {"last_loss_bits", rep.last_loss},
                                  {"checkpoint", output}}
                       .dump()
                << "\n";
    } else if (*bench) {
      const auto intr = resolve_intrinsics(bench_codec.intrinsics);
      const Model model = Model::load(checkpoint);
      BenchConfig bc;
      bc.mode = parse_coord_mode(bench_codec.mode);
      bc.intrinsics = intr ? &*intr : nullptr;
      bc.depths = parse_int_list(depths);
      bc.stage_set = parse_stage_list(bench_stages);
      bc.fully_causal = bench_codec.fully_causal;
      bc.window = bench_codec.window;
      bc.direct_levels = bench_codec.direct_levels;
      bc.workers = bench_codec.workers;
      bc.peak = peak;
      std::vector<BenchFrame> corpus;
      for (const auto& p : expand_inputs(inputs)) corpus.push_back({p.filename().string(), load_scan(p)});
      const BenchReport rep = run_bench(corpus, model, bc);
      write_text(output, report == "json" ? rep.to_json().dump(2) + "\n" : rep.to_csv());
      if (rep.any_failed()) {
        for (const auto& r : rep.rows)
          if (r.failed) std::cerr << "failed cell " << r.mode << " S=" << r.stages << " L=" << r.depth << ": " << r.error << "\n";
        return 2;
      }
    } else if (*metrics) {
      if (!curve_a.empty() || !curve_b.empty()) {
        require(!curve_a.empty() && !curve_b.empty(), ErrorKind::usage, "BD-BR needs --curve-a and --curve-b");
        auto load_curve = [](const std::string& path) {
          std::ifstream in(path);
          require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path);
          std::vector<RDPoint> c;
          std::string line;
          while (std::getline(in, line)) {
            RDPoint p;
            if (std::sscanf(line.c_str(), "%lf,%lf", &p.bpp, &p.psnr) == 2) c.push_back(p);
          }
          return c;
        };
        const auto a = load_curve(curve_a);
        const auto b = load_curve(curve_b);
        std::cout << nlohmann::json{{"bd_br_percent", bd_br(a, b)}}.dump() << "\n";
      } else {
        require(!input.empty() && !other.empty(), ErrorKind::usage, "D1 PSNR needs --input and --other");
        const auto r = d1_psnr(load_scan(input), load_scan(other), peak);
        std::cout << nlohmann::json{{"mse_ab", r.mse_ab}, {"mse_ba", r.mse_ba}, {"mse", r.mse},
                                    {"d1_psnr", report_psnr(r.psnr)}}
                         .dump()
                  << "\n";
      }
    } else if (*synth) {
      const auto intr = resolve_intrinsics(synth_intr);
      require(intr.has_value(), ErrorKind::invalid_argument, "synth needs intrinsics");
      save_points(output, synthetic_scan(*intr, scene, seed));
    } else if (*intr_cmd) {
      std::cout << resolve_intrinsics(which)->to_json().dump(2) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "lpcc: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "lpcc: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
