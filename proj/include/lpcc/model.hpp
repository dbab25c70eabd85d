#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lpcc/autograd.hpp"

namespace lpcc {

/// Hyperparameters of the backbone and predictor. Serialized as the
/// checkpoint preamble; its hash is written into every bitstream.
struct ModelConfig {
  int embed_dim = 128;
  int attention_layers = 3;
  int heads = 4;
  int ffn_dim = 256;
  int neighbors = 8;
  int generations = 3;
  int ancestor_embed = 32;
  int octant_embed = 16;
  int level_embed = 16;
  int max_level = 21;
  int head_hidden = 128;

  void validate() const;
  int token_dim() const { return generations * ancestor_embed + octant_embed + level_embed; }

  std::vector<std::uint8_t> preamble() const;
  static ModelConfig from_preamble(std::span<const std::uint8_t> bytes);
  std::uint64_t digest() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct Linear {
  nn::Parameter w;  // in x out
  nn::Parameter b;  // out
};

struct Mlp2 {
  Linear l1;
  Linear l2;
};

struct AttentionLayerWeights {
  Linear q, k, v, o;
  nn::Parameter ln1_gamma, ln1_beta;
  Linear ffn1, ffn2;
  nn::Parameter ln2_gamma, ln2_beta;
};

struct BackboneWeights {
  nn::Parameter ancestor_table;  // 256 x ancestor_embed
  nn::Parameter octant_table;    // 8 x octant_embed
  nn::Parameter level_table;     // max_level x level_embed
  Mlp2 token_mlp;                // token_dim -> d
  Mlp2 coord_mlp;                // 3 -> d
  nn::Parameter causal_table;    // 256 x d; row 0 = masked. Used only by the fully-causal mode.
  Linear edge_center;            // d -> d, applied to e'_i
  nn::Parameter edge_diff;       // d x d, applied to e'_j - e'_i
  Linear gate;
  Linear message;
  std::vector<AttentionLayerWeights> layers;
};

struct PredictorWeights {
  nn::Parameter sibling_table;  // 256 x d
  Linear ssm_a;                 // transition gate
  Linear ssm_b;                 // input gate
  Linear ssm_out;               // output projection
  Mlp2 head;                    // d -> head_hidden -> 255
};

class Model {
 public:
  explicit Model(ModelConfig cfg = {}, std::uint64_t seed = 1);

  const ModelConfig& config() const { return cfg_; }
  BackboneWeights backbone;
  PredictorWeights predictor;

  /// All parameters in checkpoint order.
  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
  std::size_t parameter_count() const;

  void zero_grad();

  std::vector<std::uint8_t> serialize() const;
  static Model deserialize(std::span<const std::uint8_t> bytes);
  void save(const std::filesystem::path& path) const;
  /// With `expected`, a checkpoint whose preamble differs is refused.
  static Model load(const std::filesystem::path& path, const ModelConfig* expected = nullptr);

  /// Hash of the full serialized checkpoint.
  std::uint64_t weights_digest() const;

 private:
  ModelConfig cfg_;
};

/// Maps parameters onto graph leaves, creating each leaf once per graph.
/// Bound to a mutable model, leaves collect gradients; bound to a const model,
/// they are constants.
class ParamBinder {
 public:
  ParamBinder(nn::Graph& g, Model& m) : g_(g), model_(m), mutable_(&m) {}
  ParamBinder(nn::Graph& g, const Model& m) : g_(g), model_(m) {}

  nn::Var operator()(const nn::Parameter& p);
  nn::Graph& graph() { return g_; }
  const Model& model() const { return model_; }

 private:
  nn::Graph& g_;
  const Model& model_;
  Model* mutable_ = nullptr;
  std::unordered_map<const nn::Parameter*, nn::Var> cache_;
};

/// y = x W + b through the graph.
nn::Var apply(ParamBinder& bind, const Linear& l, nn::Var x);
/// Linear -> SiLU -> Linear.
nn::Var apply(ParamBinder& bind, const Mlp2& m, nn::Var x);

inline constexpr int kAlphabet = 255;  // coded symbols 1..255
inline constexpr int kVocabulary = 256;  // 0 = padding / mask

}  // namespace lpcc
