#pragma once

#include <vector>

#include "evotf/autodiff.hpp"
#include "evotf/rollout.hpp"

// The distillation objective: KL between the model's proposed diagonal
// Gaussian and a recorded target distribution, differentiable in the model
// outputs.
namespace evotf {

// KL( N(mu_e, diag sigma_e^2) || N(mu_t, diag sigma_t^2) ), summed over
// dimensions:
//   1/2 sum_d [ sigma_e^2/sigma_t^2 + 2 ln(sigma_t/sigma_e)
//               + (mu_t - mu_e)^2/sigma_t^2 - 1 ]
// Throws NumericError on non-positive sigmas.
float kl_gaussian_diag(const Vec& mu_e, const Vec& sigma_e, const Vec& mu_t,
                       const Vec& sigma_t);

// Packs the featurized generations of equally-shaped trajectories.
TrajectoryBatch pack_batch(const std::vector<Trajectory>& batch);

// `updates` is forward()'s [B, D, G, 2] output for `batch`.  For every
// (trajectory, generation) the model's update is applied to the recorded
// pre-update state (eta = 1) and compared against the recorded post-update
// target; the loss is the mean over trajectories and generations of the
// per-dimension-summed KL.
ad::Tensor distillation_loss(const ad::Tensor& updates,
                             const std::vector<Trajectory>& batch);

}  // namespace evotf
