#include "lpcc/model.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

#include "lpcc/byte_io.hpp"
#include "lpcc/error.hpp"
#include "lpcc/hash.hpp"

namespace lpcc {

namespace {

constexpr char kCheckpointMagic[8] = {'L', 'P', 'C', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint32_t kConfigFields = 11;

class Init {
 public:
  explicit Init(std::uint64_t seed) : rng_(seed) {}

  // Platform-independent uniform in [-a, a): mt19937_64 output is fully
  // specified, the distribution classes are not.
  double uniform(double a) {
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return (2.0 * u - 1.0) * a;
  }

  nn::Parameter table(const std::string& name, std::size_t rows, std::size_t cols, double a) {
    nn::Tensor t = nn::Tensor::matrix(rows, cols);
    for (auto& v : t.values()) v = uniform(a);
    return nn::Parameter(name, std::move(t), false);
  }

  Linear linear(const std::string& name, std::size_t in, std::size_t out, double gain = 1.0,
                double bias = 0.0) {
    Linear l;
    nn::Tensor w = nn::Tensor::matrix(in, out);
    const double a = gain / std::sqrt(static_cast<double>(in));
    for (auto& v : w.values()) v = uniform(a);
    l.w = nn::Parameter(name + ".w", std::move(w), true);
    l.b = nn::Parameter(name + ".b", nn::Tensor::vector(out, bias), false);
    return l;
  }

  Mlp2 mlp(const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
           double out_gain = 1.0) {
    Mlp2 m;
    m.l1 = linear(name + ".1", in, hidden);
    m.l2 = linear(name + ".2", hidden, out, out_gain);
    return m;
  }

 private:
  std::mt19937_64 rng_;
};

nn::Parameter constant(const std::string& name, std::size_t n, double v) {
  return nn::Parameter(name, nn::Tensor::vector(n, v), false);
}

void push(std::vector<nn::Parameter*>& out, Linear& l) {
  out.push_back(&l.w);
  out.push_back(&l.b);
}

void push(std::vector<nn::Parameter*>& out, Mlp2& m) {
  push(out, m.l1);
  push(out, m.l2);
}

}  // namespace

void ModelConfig::validate() const {
  const auto positive = [](int v, const char* what) {
    require(v >= 1, ErrorKind::invalid_argument, std::string(what) + " must be >= 1");
  };
  positive(embed_dim, "embed_dim");
  positive(heads, "heads");
  positive(ffn_dim, "ffn_dim");
  positive(neighbors, "neighbors");
  positive(generations, "generations");
  positive(ancestor_embed, "ancestor_embed");
  positive(octant_embed, "octant_embed");
  positive(level_embed, "level_embed");
  positive(max_level, "max_level");
  positive(head_hidden, "head_hidden");
  require(attention_layers >= 0, ErrorKind::invalid_argument, "attention_layers must be >= 0");
  require(embed_dim % heads == 0, ErrorKind::invalid_argument, "embed_dim must be divisible by heads");
}

std::vector<std::uint8_t> ModelConfig::preamble() const {
  ByteWriter w;
  w.u32(kConfigFields);
  for (int v : {embed_dim, attention_layers, heads, ffn_dim, neighbors, generations, ancestor_embed,
                octant_embed, level_embed, max_level, head_hidden})
    w.i32(v);
  return w.take();
}

ModelConfig ModelConfig::from_preamble(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  require(r.u32() == kConfigFields, ErrorKind::format, "unsupported model config layout");
  ModelConfig c;
  for (int* f : {&c.embed_dim, &c.attention_layers, &c.heads, &c.ffn_dim, &c.neighbors, &c.generations,
                 &c.ancestor_embed, &c.octant_embed, &c.level_embed, &c.max_level, &c.head_hidden})
    *f = r.i32();
  require(r.remaining() == 0, ErrorKind::format, "trailing bytes in model config");
  c.validate();
  return c;
}

std::uint64_t ModelConfig::digest() const { return hash64(preamble()); }

Model::Model(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Init init(seed);
  const auto d = static_cast<std::size_t>(cfg_.embed_dim);

  auto& b = backbone;
  b.ancestor_table = init.table("backbone.ancestor_table", kVocabulary, cfg_.ancestor_embed, 0.5);
  b.octant_table = init.table("backbone.octant_table", 8, cfg_.octant_embed, 0.5);
  b.level_table = init.table("backbone.level_table", cfg_.max_level, cfg_.level_embed, 0.5);
  b.token_mlp = init.mlp("backbone.token_mlp", cfg_.token_dim(), d, d);
  b.coord_mlp = init.mlp("backbone.coord_mlp", 3, d, d);
  b.causal_table = nn::Parameter("backbone.causal_table", nn::Tensor::matrix(kVocabulary, d), false);
  b.edge_center = init.linear("backbone.edge_center", d, d);
  b.edge_diff = nn::Parameter("backbone.edge_diff", init.linear("tmp", d, d).w.value, true);
  b.gate = init.linear("backbone.gate", d, d);
  b.message = init.linear("backbone.message", d, d);
  for (int l = 0; l < cfg_.attention_layers; ++l) {
    const std::string p = "backbone.attn" + std::to_string(l);
    AttentionLayerWeights a;
    a.q = init.linear(p + ".q", d, d);
    a.k = init.linear(p + ".k", d, d);
    a.v = init.linear(p + ".v", d, d);
    a.o = init.linear(p + ".o", d, d);
    a.ln1_gamma = constant(p + ".ln1.gamma", d, 1.0);
    a.ln1_beta = constant(p + ".ln1.beta", d, 0.0);
    a.ffn1 = init.linear(p + ".ffn1", d, cfg_.ffn_dim);
    a.ffn2 = init.linear(p + ".ffn2", cfg_.ffn_dim, d);
    a.ln2_gamma = constant(p + ".ln2.gamma", d, 1.0);
    a.ln2_beta = constant(p + ".ln2.beta", d, 0.0);
    b.layers.push_back(std::move(a));
  }

  auto& p = predictor;
  p.sibling_table = init.table("predictor.sibling_table", kVocabulary, d, 0.1);
  p.ssm_a = init.linear("predictor.ssm_a", d, d, 1.0, 1.0);
  p.ssm_b = init.linear("predictor.ssm_b", d, d);
  p.ssm_out = init.linear("predictor.ssm_out", d, d, 0.5);
  p.head = init.mlp("predictor.head", d, cfg_.head_hidden, kAlphabet, 0.5);
}

std::vector<nn::Parameter*> Model::parameters() {
  std::vector<nn::Parameter*> out;
  auto& b = backbone;
  out.push_back(&b.ancestor_table);
  out.push_back(&b.octant_table);
  out.push_back(&b.level_table);
  push(out, b.token_mlp);
  push(out, b.coord_mlp);
  out.push_back(&b.causal_table);
  push(out, b.edge_center);
  out.push_back(&b.edge_diff);
  push(out, b.gate);
  push(out, b.message);
  for (auto& a : b.layers) {
    push(out, a.q);
    push(out, a.k);
    push(out, a.v);
    push(out, a.o);
    out.push_back(&a.ln1_gamma);
    out.push_back(&a.ln1_beta);
    push(out, a.ffn1);
    push(out, a.ffn2);
    out.push_back(&a.ln2_gamma);
    out.push_back(&a.ln2_beta);
  }
  auto& p = predictor;
  out.push_back(&p.sibling_table);
  push(out, p.ssm_a);
  push(out, p.ssm_b);
  push(out, p.ssm_out);
  push(out, p.head);
  return out;
}

std::vector<const nn::Parameter*> Model::parameters() const {
  auto ps = const_cast<Model*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->value.size();
  return n;
}

void Model::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

std::vector<std::uint8_t> Model::serialize() const {
  ByteWriter w;
  w.raw({reinterpret_cast<const std::uint8_t*>(kCheckpointMagic), sizeof(kCheckpointMagic)});
  w.u32(kCheckpointVersion);
  const auto pre = cfg_.preamble();
  w.u32(static_cast<std::uint32_t>(pre.size()));
  w.raw(pre);
  const auto ps = parameters();
  w.u32(static_cast<std::uint32_t>(ps.size()));
  for (const auto* p : ps) {
    w.str(p->name);
    w.u32(static_cast<std::uint32_t>(p->value.rank()));
    for (auto dim : p->value.shape()) w.u64(dim);
    for (double v : p->value.values()) w.f64(v);
  }
  w.u64(hash64(w.bytes()));
  return w.take();
}

Model Model::deserialize(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= sizeof(kCheckpointMagic) + 8, ErrorKind::truncated, "checkpoint too short");
  ByteReader r(bytes);
  const auto magic = r.raw(sizeof(kCheckpointMagic));
  require(std::equal(magic.begin(), magic.end(), kCheckpointMagic), ErrorKind::format,
          "not a checkpoint file");
  const auto version = r.u32();
  require(version == kCheckpointVersion, ErrorKind::format,
          "unsupported checkpoint version " + std::to_string(version));
  const auto body = bytes.first(bytes.size() - 8);
  ByteReader tail(bytes.subspan(bytes.size() - 8));
  require(tail.u64() == hash64(body), ErrorKind::corrupt, "checkpoint checksum mismatch");

  const auto pre_len = r.u32();
  require(pre_len <= 4096, ErrorKind::corrupt, "checkpoint preamble too long");
  const ModelConfig cfg = ModelConfig::from_preamble(r.raw(pre_len));
  Model m(cfg, 0);
  const auto ps = m.parameters();
  require(r.u32() == ps.size(), ErrorKind::config_mismatch, "checkpoint tensor count does not match config");
  for (auto* p : ps) {
    const auto name = r.str(256);
    require(name == p->name, ErrorKind::config_mismatch,
            "checkpoint tensor '" + name + "' where '" + p->name + "' was expected");
    const auto rank = r.u32();
    require(rank == p->value.rank(), ErrorKind::config_mismatch, "rank mismatch for " + name);
    for (std::size_t i = 0; i < rank; ++i)
      require(r.u64() == p->value.shape()[i], ErrorKind::config_mismatch, "shape mismatch for " + name);
    for (auto& v : p->value.values()) {
      v = r.f64();
      require(std::isfinite(v), ErrorKind::corrupt, "non-finite weight in " + name);
    }
  }
  require(r.remaining() == 8, ErrorKind::corrupt, "trailing bytes in checkpoint");
  return m;
}

void Model::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorKind::io, "failed writing " + path.string());
}

Model Model::load(const std::filesystem::path& path, const ModelConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Model m = deserialize(bytes);
  if (expected)
    require(m.config() == *expected, ErrorKind::config_mismatch,
            "checkpoint model config does not match the requested config");
  return m;
}

std::uint64_t Model::weights_digest() const { return hash64(serialize()); }

nn::Var ParamBinder::operator()(const nn::Parameter& p) {
  auto it = cache_.find(&p);
  if (it != cache_.end()) return it->second;
  const nn::Var v = mutable_ ? g_.param(const_cast<nn::Parameter&>(p)) : g_.param(p);
  cache_.emplace(&p, v);
  return v;
}

nn::Var apply(ParamBinder& bind, const Linear& l, nn::Var x) {
  return nn::affine(bind.graph(), x, bind(l.w), bind(l.b));
}

nn::Var apply(ParamBinder& bind, const Mlp2& m, nn::Var x) {
  auto& g = bind.graph();
  return apply(bind, m.l2, nn::silu(g, apply(bind, m.l1, x)));
}

}  // namespace lpcc
