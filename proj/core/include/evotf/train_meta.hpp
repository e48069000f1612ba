#pragma once

#include <cstdint>
#include <string>

#include "evotf/array.hpp"
#include "evotf/model.hpp"
#include "evotf/tasks.hpp"

// Evolving the model's weights directly: an outer separable CMA-ES proposes
// flat parameter vectors, each candidate is scored by running the model as
// an ES on a batch of tasks under common random numbers, and z-normalized
// scores drive the outer update.
namespace evotf {

struct MetaConfig {
  int meta_pop{256};
  int meta_gens{1000};
  int task_batch{64};
  float sigma_init{0.005f};
  std::string init_checkpoint;  // empty: fresh zero-head initialization
  ModelConfig model;            // ignored when init_checkpoint is set
  TaskSetName tasks{TaskSetName::Medium};
  int dims{5};
  int pop{10};
  int gens{32};
  int window{5};
  int checkpoint_every{10};
  std::uint64_t seed{0};

  MetaConfig() { model.use_cross_dim = false; }
  void validate() const;
};

struct MetaResult {
  ModelParams params;  // outer-ES mean loaded into the model
};

// Z-scores each task column across the population (guard 1e-10), then
// averages across tasks.  Lower is better.
Vec znorm_meta_fitness(const Mat& scores);

// Replaces non-finite entries column-wise with the worst finite score in
// that column (0 when a column has no finite entry).
void apply_worst_finite_penalty(Mat& scores);

MetaResult train_meta(const MetaConfig& cfg, const std::string& out_dir);

}  // namespace evotf
