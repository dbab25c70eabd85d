#pragma once

#include <cstdint>
#include <vector>

#include "lpcc/autograd.hpp"

namespace lpcc::nn {

struct AdamWConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

/// Adaptive moments with decoupled weight decay. Decay is applied to the
/// weights directly (only for parameters flagged `decay`), never through the
/// gradient.
class AdamW {
 public:
  AdamW(std::vector<Parameter*> params, AdamWConfig cfg = {});

  void step();
  void zero_grad();

  std::int64_t steps() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }
  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  AdamWConfig cfg_;
  std::int64_t t_ = 0;
};

/// Scales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm);

}  // namespace lpcc::nn
