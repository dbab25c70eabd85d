#include "lpcc/optim.hpp"

#include <cmath>

namespace lpcc::nn {

AdamW::AdamW(std::vector<Parameter*> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (auto* p : params_) {
    m_.emplace_back(p->value.shape(), 0.0);
    v_.emplace_back(p->value.shape(), 0.0);
  }
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = *params_[k];
    if (!p.trainable) continue;
    auto& m = m_[k];
    auto& v = v_[k];
    const double decay = p.decay ? cfg_.learning_rate * cfg_.weight_decay : 0.0;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.value[i] -= decay * p.value[i];
      p.value[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }
}

void AdamW::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm) {
  double sq = 0.0;
  for (const auto* p : params)
    for (double g : p->grad.values()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto* p : params)
      for (double& g : p->grad.values()) g *= s;
  }
  return norm;
}

}  // namespace lpcc::nn
