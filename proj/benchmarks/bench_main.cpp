#include <benchmark/benchmark.h>

#include "evotf/autodiff.hpp"
#include "evotf/distill.hpp"
#include "evotf/model.hpp"
#include "evotf/rollout.hpp"
#include "evotf/teachers.hpp"

using namespace evotf;
using ad::Tensor;

namespace {

Tensor random_tensor(ad::Shape s, Rng& rng) {
  std::vector<float> v(static_cast<std::size_t>(ad::shape_numel(s)));
  rng.fill_normal(v);
  return Tensor::from(std::move(s), std::move(v));
}

std::vector<GenFeatures> model_context(int gens, int pop, int dims,
                                       std::uint64_t seed) {
  Rng rng(make_key(seed));
  PathState ps = make_path_state(dims);
  Vec mu(static_cast<std::size_t>(dims), 0.3f);
  Vec sigma(static_cast<std::size_t>(dims), 0.8f);
  std::vector<GenFeatures> ctx;
  for (int g = 0; g < gens; ++g) {
    Mat X(pop, dims);
    rng.fill_normal(X.data);
    Vec F(static_cast<std::size_t>(pop));
    rng.fill_uniform(F, 0.0f, 3.0f);
    ctx.push_back(featurize_generation(X, F, mu, sigma, ps));
  }
  return ctx;
}

void bm_matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(make_key(1));
  ad::NoGradGuard ng;
  Tensor a = random_tensor({n, n}, rng), b = random_tensor({n, n}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(ad::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * 2LL * n * n * n);
}
BENCHMARK(bm_matmul)->Arg(64)->Arg(128)->Arg(256);

void bm_featurize(benchmark::State& state) {
  const int pop = 16, dims = static_cast<int>(state.range(0));
  Rng rng(make_key(2));
  Mat X(pop, dims);
  rng.fill_normal(X.data);
  Vec F(pop);
  rng.fill_uniform(F, 0.0f, 3.0f);
  Vec mu(static_cast<std::size_t>(dims), 0.1f);
  Vec sigma(static_cast<std::size_t>(dims), 1.0f);
  PathState ps = make_path_state(dims);
  for (auto _ : state)
    benchmark::DoNotOptimize(featurize_generation(X, F, mu, sigma, ps));
}
BENCHMARK(bm_featurize)->Arg(5)->Arg(32);

void bm_forward(benchmark::State& state) {
  const int gens = static_cast<int>(state.range(0));
  ModelConfig cfg;  // full-size default architecture
  ModelParams p = make_params(cfg, 3u);
  std::vector<std::vector<GenFeatures>> trajs{model_context(gens, 16, 5, 4)};
  TrajectoryBatch tb = pack_trajectories(trajs);
  ad::NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(forward(p, tb));
}
BENCHMARK(bm_forward)->Arg(1)->Arg(5)->Arg(16)->Unit(benchmark::kMillisecond);

void bm_distill_step(benchmark::State& state) {
  ModelConfig cfg;
  ModelParams p = make_params(cfg, 5u);
  Objective obj = bbob_objective(
      TaskSpec{BbobFn::Sphere, 5, Vec(5, 0.0f), 0});
  GeneratedTrajectory gt = generate_teacher_trajectory(TeacherAlgo::Snes, obj,
                                                       5, 16, 8, make_key(6));
  std::vector<Trajectory> batch{gt.traj};
  std::vector<Tensor> params = param_list(p);
  for (auto _ : state) {
    Tensor loss = distillation_loss(forward(p, pack_batch(batch)), batch);
    ad::backward(loss);
    for (Tensor& t : params) t.zero_grad();
  }
}
BENCHMARK(bm_distill_step)->Unit(benchmark::kMillisecond);

void bm_teacher_tell(benchmark::State& state) {
  const auto algo = static_cast<TeacherAlgo>(state.range(0));
  const int dims = 32, pop = 64;
  Rng rng(make_key(7));
  EsState st = make_es_state(Vec(dims, 0.2f), Vec(dims, 0.9f));
  Mat X = ask_teacher(algo, st, rng, pop);
  Vec F(pop);
  rng.fill_uniform(F, 0.0f, 3.0f);
  for (auto _ : state) benchmark::DoNotOptimize(tell_teacher(algo, st, X, F));
}
BENCHMARK(bm_teacher_tell)
    ->Arg(static_cast<int>(TeacherAlgo::Snes))
    ->Arg(static_cast<int>(TeacherAlgo::SepCmaEs))
    ->Arg(static_cast<int>(TeacherAlgo::OpenEs))
    ->Arg(static_cast<int>(TeacherAlgo::HillClimb));

void bm_model_rollout_gen(benchmark::State& state) {
  ModelConfig cfg;
  ModelParams p = make_params(cfg, 8u);
  Objective obj = bbob_objective(
      TaskSpec{BbobFn::Sphere, 5, Vec(5, 0.0f), 0});
  for (auto _ : state) {
    EvoTfStrategy strat(p, Vec(5, 0.5f), Vec(5, 1.0f), 5);
    benchmark::DoNotOptimize(run_strategy(strat, obj, 5, 16, make_key(9)));
  }
  state.SetItemsProcessed(state.iterations() * 5);  // generations per run
}
BENCHMARK(bm_model_rollout_gen)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
