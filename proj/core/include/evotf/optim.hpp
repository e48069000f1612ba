#pragma once

#include <cstdint>
#include <vector>

#include "evotf/autodiff.hpp"

namespace evotf {

struct AdamConfig {
  float lr{1e-3f};
  float beta1{0.9f};
  float beta2{0.999f};
  float eps{1e-8f};  // added to sqrt(v_hat), outside the root
};

class Adam {
 public:
  Adam(std::vector<ad::Tensor> params, AdamConfig cfg);

  // Applies one update from the gradients currently on the parameters.
  // lr_override < 0 means "use the configured rate".
  void step(float lr_override = -1.0f);

  std::int64_t t() const { return t_; }

 private:
  std::vector<ad::Tensor> params_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  AdamConfig cfg_;
  std::int64_t t_{0};
};

// Scales all gradients so their joint L2 norm is at most max_norm.
// Returns the pre-clip norm.
float clip_global_norm(std::vector<ad::Tensor>& params, float max_norm);

// Linear warmup to `peak` over ceil(warmup_frac * total) steps, then cosine
// decay to `floor_lr` at the final step.
float cosine_warmup_lr(std::int64_t step, std::int64_t total, float peak,
                       float floor_lr, float warmup_frac = 0.1f);

}  // namespace evotf
