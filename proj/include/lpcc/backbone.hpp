#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

#include "lpcc/model.hpp"
#include "lpcc/octree.hpp"

namespace lpcc {

/// Per-frame execution counters. Atomic so concurrent window workers can
/// share one instance.
struct InvocationCounters {
  std::atomic<std::uint64_t> backbone{0};
  std::atomic<std::uint64_t> predictor{0};
};

/// k nearest nodes of every node (itself included) by Euclidean distance on
/// the normalized coordinates; ties go to the lower index. k is capped at the
/// window length.
std::vector<std::vector<std::uint32_t>> knn_graph(std::span<const NodeContext> nodes, std::size_t k);

/// Concatenated ancestor, octant and level embeddings (n x token_dim).
nn::Var tokenize(ParamBinder& bind, std::span<const NodeContext> nodes);

/// Token/coordinate fusion plus gated edge aggregation over the k-NN graph.
/// `causal` (empty or one entry per node, 0 = masked) feeds the extra input
/// channel of the fully-causal mode.
nn::Var positional_encoding(ParamBinder& bind, nn::Var tokens, std::span<const NodeContext> nodes,
                            std::span<const int> causal = {});

/// Post-norm residual attention/feed-forward stack, unmasked.
nn::Var attention_stack(ParamBinder& bind, nn::Var x);

/// Whole backbone on one window through the given graph. Counts one invocation.
nn::Var backbone_forward(ParamBinder& bind, std::span<const NodeContext> nodes,
                         std::span<const int> causal = {}, InvocationCounters* counters = nullptr);

/// Inference entry point: context features A (n x d) for one window.
nn::Tensor run_backbone(const Model& model, std::span<const NodeContext> nodes,
                        std::span<const int> causal = {}, InvocationCounters* counters = nullptr);

}  // namespace lpcc
