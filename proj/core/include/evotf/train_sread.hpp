#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evotf/model.hpp"
#include "evotf/rng.hpp"
#include "evotf/tasks.hpp"

// Teacher-free distillation: Gaussian-perturbed copies of the current model
// compete on sampled tasks, the best rollout per task enters a FIFO buffer,
// and one gradient step distills the buffer back into the base model.
namespace evotf {

struct SreadConfig {
  int offspring{64};
  float sigma0{0.004f};
  float decay{0.99999f};
  int iterations{1000};
  int buffer_cap{32};
  float lr{0.0015f};
  float clip{1.0f};
  TaskSetName tasks{TaskSetName::Medium};
  ModelConfig model;
  int dims{5};
  int pop{10};
  int gens{32};
  int window{5};
  int checkpoint_every{50};
  std::uint64_t seed{0};

  void validate() const;
};

struct SreadResult {
  ModelParams params;
  int skipped_steps{0};
  int skipped_tasks{0};  // iterations x tasks with no finite offspring
};

// theta' = theta + sigma_p * eps, eps i.i.d. standard normal.
std::vector<float> perturb(const std::vector<float>& theta, float sigma_p,
                           Rng& rng);

SreadResult train_sread(const SreadConfig& cfg, const std::string& out_dir);

}  // namespace evotf
