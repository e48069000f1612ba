#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "evotf/features.hpp"
#include "evotf/model.hpp"
#include "evotf/tasks.hpp"
#include "evotf/teachers.hpp"

// Generic ask/tell rollouts: the same loop drives teacher algorithms, the
// learned optimizer (with its sliding context window), and baseline dummies,
// optionally recording a full trajectory for distillation.
namespace evotf {

// Evaluates a population (rows of X) to a fitness vector; lower is better.
// The Rng serves stochastic objectives and is advanced deterministically.
using Objective = std::function<Vec(const Mat&, Rng&)>;

Objective bbob_objective(const TaskSpec& task);
Objective control_objective(const ControlTask& task);
// f(x) ~ N(0,1), fresh per candidate per call: pure noise, no signal.
Objective random_fitness_objective();
// f(x) = sum_d x_d: an unbounded linear slope.
Objective linear_sum_objective();

class AskTellOptimizer {
 public:
  virtual ~AskTellOptimizer() = default;
  virtual Mat ask(Rng& rng, int n) = 0;
  virtual void tell(const Mat& X, const Vec& F) = 0;
  virtual const Vec& mu() const = 0;
  virtual const Vec& sigma() const = 0;
  virtual std::string name() const = 0;
};

class TeacherStrategy : public AskTellOptimizer {
 public:
  TeacherStrategy(TeacherAlgo algo, Vec mu0, Vec sigma0);
  Mat ask(Rng& rng, int n) override;
  void tell(const Mat& X, const Vec& F) override;
  const Vec& mu() const override { return state_.mu; }
  const Vec& sigma() const override { return state_.sigma; }
  std::string name() const override { return teacher_name(algo_); }
  const EsState& state() const { return state_; }

 private:
  TeacherAlgo algo_;
  EsState state_;
};

// Keeps the sampling distribution fixed: pure random search around the
// initial (mu, sigma).
class RandomSearchStrategy : public AskTellOptimizer {
 public:
  RandomSearchStrategy(Vec mu0, Vec sigma0);
  Mat ask(Rng& rng, int n) override;
  void tell(const Mat&, const Vec&) override {}
  const Vec& mu() const override { return mu_; }
  const Vec& sigma() const override { return sigma_; }
  std::string name() const override { return "random"; }

 private:
  Vec mu_;
  Vec sigma_;
};

// The learned optimizer in inference mode: featurize each generation, keep
// the most recent `window` feature tensors for attention, run the causal
// forward pass, and apply the last generation's predicted update.  The path
// statistics are a recurrence over the whole run and survive window
// evictions.
class EvoTfStrategy : public AskTellOptimizer {
 public:
  EvoTfStrategy(ModelParams params, Vec mu0, Vec sigma0, int window = 5,
                float eta_mu = 1.0f, float eta_sigma = 1.0f);
  Mat ask(Rng& rng, int n) override;
  void tell(const Mat& X, const Vec& F) override;
  const Vec& mu() const override { return mu_; }
  const Vec& sigma() const override { return sigma_; }
  std::string name() const override { return "evotf"; }
  const std::deque<GenFeatures>& context() const { return window_; }

 private:
  ModelParams params_;
  Vec mu_;
  Vec sigma_;
  int window_cap_;
  float eta_mu_, eta_sigma_;
  PathState paths_;
  std::deque<GenFeatures> window_;
};

struct RolloutResult {
  Vec gen_best;      // best fitness within each generation
  Vec best_so_far;   // running minimum; non-increasing
  Vec final_mu;
  Vec final_sigma;
  std::uint64_t seed{0};
  int generations_completed{0};
  bool failed{false};  // a generation produced non-finite fitness
  double wall_seconds{0.0};

  float final_best() const;  // +inf when nothing completed
};

// A recorded rollout: raw populations and fitness, the distribution state
// around every tell, and the featurized generations ready for distillation.
struct Trajectory {
  std::vector<Mat> X;
  std::vector<Vec> F;
  std::vector<Vec> mu_pre, sigma_pre;    // state the update was predicted from
  std::vector<Vec> mu_post, sigma_post;  // distillation targets
  std::vector<GenFeatures> features;
  Vec best_curve;
  std::string source;
  std::uint64_t source_id{0};

  int generations() const { return static_cast<int>(X.size()); }
  float final_best() const;
};

// ask -> evaluate -> tell for `gens` generations.  Ask and objective draws
// come from per-generation splits of `key`, so two strategies given the same
// key see identical streams regardless of how much randomness each consumes.
// Non-finite fitness stops the run and marks it failed (partial curves kept).
RolloutResult run_strategy(AskTellOptimizer& strategy, const Objective& obj,
                           int gens, int pop, RngKey key,
                           Trajectory* record = nullptr);

// mu0 ~ U[-3,3]^D; sigma0 = one log-uniform draw from [0.25, 2], replicated.
void sample_init(Rng& rng, int dims, Vec& mu0, Vec& sigma0);

// Runs a freshly initialized teacher on the objective, recording the
// trajectory.  `ok` mirrors !result.failed.
struct GeneratedTrajectory {
  Trajectory traj;
  RolloutResult result;
  bool ok{false};
};
GeneratedTrajectory generate_teacher_trajectory(TeacherAlgo algo,
                                                const Objective& obj, int dims,
                                                int pop, int gens, RngKey key);
GeneratedTrajectory generate_model_trajectory(const ModelParams& params,
                                              const Objective& obj, int dims,
                                              int pop, int gens, int window,
                                              RngKey key);

}  // namespace evotf
