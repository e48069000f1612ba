#include "evotf/optim.hpp"

#include <cmath>
#include <numbers>

namespace evotf {

Adam::Adam(std::vector<ad::Tensor> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0f);
    v_.emplace_back(static_cast<std::size_t>(p.numel()), 0.0f);
  }
}

void Adam::step(float lr_override) {
  const float lr = lr_override < 0.0f ? cfg_.lr : lr_override;
  ++t_;
  const float bc1 =
      1.0f - std::pow(cfg_.beta1, static_cast<float>(t_));
  const float bc2 =
      1.0f - std::pow(cfg_.beta2, static_cast<float>(t_));
  for (std::size_t p = 0; p < params_.size(); ++p) {
    const auto& g = params_[p].grad();
    auto& vals = params_[p].values();
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < vals.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0f - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0f - cfg_.beta2) * g[i] * g[i];
      const float mhat = m[i] / bc1;
      const float vhat = v[i] / bc2;
      vals[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

float clip_global_norm(std::vector<ad::Tensor>& params, float max_norm) {
  double sq = 0.0;
  for (auto& p : params) {
    for (float g : p.grad()) sq += static_cast<double>(g) * g;
  }
  const auto norm = static_cast<float>(std::sqrt(sq));
  if (norm > max_norm && norm > 0.0f) {
    const float s = max_norm / norm;
    for (auto& p : params) {
      for (float& g : p.grad_mut()) g *= s;
    }
  }
  return norm;
}

float cosine_warmup_lr(std::int64_t step, std::int64_t total, float peak,
                       float floor_lr, float warmup_frac) {
  const auto warmup = std::max<std::int64_t>(
      1, std::llround(static_cast<double>(total) * warmup_frac));
  if (step < warmup) {
    return peak * static_cast<float>(step + 1) / static_cast<float>(warmup);
  }
  const auto denom = std::max<std::int64_t>(1, total - 1 - warmup);
  const double p = std::min(
      1.0, static_cast<double>(step - warmup) / static_cast<double>(denom));
  return floor_lr +
         0.5f * (peak - floor_lr) *
             static_cast<float>(1.0 + std::cos(std::numbers::pi * p));
}

}  // namespace evotf
