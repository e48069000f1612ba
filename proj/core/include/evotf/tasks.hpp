#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evotf/array.hpp"
#include "evotf/rng.hpp"

namespace evotf {

// Axis-aligned BBOB-style benchmark functions.  Every function is evaluated
// on z = x - b (offset b per task instance); no rotation or oscillation
// transforms are applied.
enum class BbobFn {
  Sphere,
  Rosenbrock,
  Discus,
  Rastrigin,
  Schwefel,
  BuecheRastrigin,
  AttractiveSector,
  Weierstrass,
  SchaffersF7,
  GriewankRosen,
};

const char* bbob_name(BbobFn fn);

struct TaskSpec {
  BbobFn fn{BbobFn::Sphere};
  int dims{0};
  Vec offset;  // length dims
  std::uint64_t seed{0};
};

enum class TaskSetName { Small, Medium, Large };

TaskSetName task_set_from_name(const std::string& name);  // ConfigError on bad name
const char* task_set_name(TaskSetName set);
const std::vector<BbobFn>& task_set_members(TaskSetName set);

float eval_bbob(const TaskSpec& spec, std::span<const float> x);

// Uniform function choice from the set, offsets i.i.d. U[-3, 3].
TaskSpec sample_task(TaskSetName set, int dims, Rng& rng);

// Classic-control neuroevolution tasks: tanh MLP policy, fitness is the
// negated mean episodic return over num_rollouts seeded episodes.
struct ControlTask {
  enum class Env { CartPole, Pendulum };
  Env env{Env::CartPole};
  std::vector<int> layout;  // layer widths including input and output
  int episode_length{200};
  int num_rollouts{4};
  std::uint64_t seed{0};
};

ControlTask make_cartpole(std::uint64_t seed);
ControlTask make_pendulum(std::uint64_t seed);

int policy_param_count(const ControlTask& task);
float eval_policy(const ControlTask& task, std::span<const float> flat_weights);

}  // namespace evotf
