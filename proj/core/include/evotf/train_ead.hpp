#pragma once

#include <cstdint>
#include <string>

#include "evotf/model.hpp"
#include "evotf/tasks.hpp"
#include "evotf/teachers.hpp"

// Supervised distillation of a teacher algorithm: every step generates a
// fresh batch of teacher rollouts on sampled tasks and fits the model's
// per-generation updates to the teacher's with the Gaussian KL loss.
namespace evotf {

struct EadConfig {
  TeacherAlgo teacher{TeacherAlgo::Snes};
  TaskSetName tasks{TaskSetName::Medium};
  int dims{5};
  int pop{10};
  int gens{32};
  int batch{32};
  int steps{5000};
  float lr{0.0015f};
  float lr_floor{1e-5f};
  float clip{1.0f};
  int eval_every{500};
  int checkpoint_every{500};
  int eval_seeds{3};
  ModelConfig model;
  std::uint64_t seed{0};

  void validate() const;
};

struct EadResult {
  ModelParams params;
  int skipped_steps{0};
  int resampled_trajectories{0};
};

// Writes metrics.jsonl, periodic ckpt_<step>.evotf files, and final.evotf
// into out_dir (which must exist).
EadResult train_ead(const EadConfig& cfg, const std::string& out_dir);

}  // namespace evotf
