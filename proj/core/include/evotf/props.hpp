#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "evotf/rollout.hpp"

// Behavioural property checks for ask/tell optimizers: mean-update
// unbiasedness under pure-noise fitness, invariance to fitness-function
// translation, and step-size growth on a linear slope.  Each check builds
// fresh strategies through a factory so teachers, the learned optimizer, and
// planted-failure dummies all run through identical harnesses.
namespace evotf {

using StrategyFactory =
    std::function<std::unique_ptr<AskTellOptimizer>(Vec mu0, Vec sigma0)>;

StrategyFactory teacher_factory(TeacherAlgo algo);
StrategyFactory model_factory(ModelParams params, int window = 5,
                              float eta_mu = 1.0f, float eta_sigma = 1.0f);

// With f(x) ~ N(0,1) fresh per candidate, no coordinate of mu should drift:
// runs `trials` seeded rollouts and compares the per-coordinate mean of
// (mu_final - mu_0) against 3 standard errors.
struct UnbiasednessReport {
  Vec mean_drift;
  Vec stderr_per_coord;
  int trials{0};
  bool pass{false};
};
UnbiasednessReport check_unbiasedness(const StrategyFactory& make, int trials = 64,
                                      int dims = 3, int pop = 5, int gens = 8,
                                      std::uint64_t seed = 0);

// Sphere rollouts whose optimum and initial mean are both shifted by an
// offset must perform alike: compares median final best fitness across
// offsets (max/min ratio <= 2 passes).  Trials share seeds across offsets.
struct TranslationReport {
  std::vector<float> offsets;
  Vec median_final;
  Vec median_dist;  // median ||mu_final - offset|| per offset
  float ratio{0.0f};
  bool pass{false};
};
TranslationReport check_translation_invariance(
    const StrategyFactory& make, std::vector<float> offsets = {-2.0f, 0.0f, 2.0f},
    int trials = 16, int dims = 3, int pop = 5, int gens = 32,
    std::uint64_t seed = 0);

// On f(x) = sum_d x_d the optimum is at infinity, so a healthy step-size
// rule grows sigma: compares the median (over trials) of mean sigma after
// the first and after the last generation.
struct ScaleReport {
  float median_first{0.0f};
  float median_last{0.0f};
  bool pass{false};
};
ScaleReport check_scale_adaptation(const StrategyFactory& make, int trials = 16,
                                   int dims = 3, int pop = 5, int gens = 32,
                                   std::uint64_t seed = 0);

}  // namespace evotf
