#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <vector>

#include "doctest.h"
#include "evotf/errors.hpp"
#include "evotf/rollout.hpp"

using namespace evotf;

TEST_SUITE_BEGIN("rollout");

namespace {

bool bitwise_equal(const Vec& a, const Vec& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

TaskSpec task(BbobFn fn, int dims, float offset = 0.0f) {
  TaskSpec t;
  t.fn = fn;
  t.dims = dims;
  t.offset = Vec(static_cast<std::size_t>(dims), offset);
  return t;
}

Objective sphere(int dims) { return bbob_objective(task(BbobFn::Sphere, dims)); }

ModelConfig micro() {
  ModelConfig mc;
  mc.embed_dim = 8;
  mc.num_latents = 2;
  mc.latent_dim = 4;
  return mc;
}

void randomize_head(ModelParams& p, std::uint64_t seed) {
  Rng rng(make_key(seed));
  for (float& v : p.head2.w.values()) v = 0.05f * rng.normal();
  for (float& v : p.head2.b.values()) v = 0.05f * rng.normal();
}

}  // namespace

TEST_CASE("best_so_far is non-increasing for every strategy") {
  const Objective obj = sphere(5);
  Vec mu0(5, 1.5f), sigma0(5, 0.7f);
  std::vector<std::unique_ptr<AskTellOptimizer>> strategies;
  for (auto algo : {TeacherAlgo::Snes, TeacherAlgo::SepCmaEs,
                    TeacherAlgo::OpenEs, TeacherAlgo::HillClimb})
    strategies.push_back(std::make_unique<TeacherStrategy>(algo, mu0, sigma0));
  strategies.push_back(std::make_unique<RandomSearchStrategy>(mu0, sigma0));
  strategies.push_back(
      std::make_unique<EvoTfStrategy>(make_params(micro(), 3u), mu0, sigma0));

  for (auto& s : strategies) {
    CAPTURE(s->name());
    RolloutResult r = run_strategy(*s, obj, 12, 8, make_key(41));
    REQUIRE(!r.failed);
    REQUIRE(r.best_so_far.size() == 12);
    for (std::size_t g = 1; g < r.best_so_far.size(); ++g)
      CHECK(r.best_so_far[g] <= r.best_so_far[g - 1]);
    CHECK(r.final_best() == r.best_so_far.back());
    CHECK(r.generations_completed == 12);
  }
}

TEST_CASE("a zero model reproduces random search bitwise") {
  ModelParams fresh = make_params(micro(), 7u);  // head is zero-initialized

  Vec mu0{0.4f, -1.0f, 2.0f}, sigma0(3, 0.9f);
  EvoTfStrategy model(fresh, mu0, sigma0, /*window=*/5);
  RandomSearchStrategy random(mu0, sigma0);

  const Objective obj = bbob_objective(task(BbobFn::Rosenbrock, 3));
  RolloutResult a = run_strategy(model, obj, 10, 6, make_key(99));
  RolloutResult b = run_strategy(random, obj, 10, 6, make_key(99));
  CHECK(bitwise_equal(a.gen_best, b.gen_best));
  CHECK(bitwise_equal(a.best_so_far, b.best_so_far));
  CHECK(bitwise_equal(a.final_mu, b.final_mu));
  CHECK(bitwise_equal(a.final_sigma, b.final_sigma));
}

TEST_CASE("window at least as long as the run changes nothing") {
  ModelParams p = make_params(micro(), 21u);
  randomize_head(p, 5);  // real weights so updates are non-trivial

  Vec mu0(4, 0.5f), sigma0(4, 1.0f);
  const Objective obj = sphere(4);

  EvoTfStrategy exact(p, mu0, sigma0, /*window=*/6);
  EvoTfStrategy wide(p, mu0, sigma0, /*window=*/32);
  RolloutResult a = run_strategy(exact, obj, 6, 8, make_key(17));
  RolloutResult b = run_strategy(wide, obj, 6, 8, make_key(17));
  CHECK(bitwise_equal(a.final_mu, b.final_mu));
  CHECK(bitwise_equal(a.final_sigma, b.final_sigma));
  CHECK(bitwise_equal(a.best_so_far, b.best_so_far));
}

TEST_CASE("path statistics persist across window evictions") {
  ModelParams p = make_params(micro(), 21u);
  randomize_head(p, 5);

  Vec mu0(3, 0.5f), sigma0(3, 1.0f);
  const Objective obj = sphere(3);

  EvoTfStrategy strat(p, mu0, sigma0, /*window=*/2);
  Trajectory traj;
  RolloutResult r = run_strategy(strat, obj, 6, 8, make_key(17), &traj);
  REQUIRE(!r.failed);
  CHECK(strat.context().size() == 2);  // four generations were evicted

  // the surviving context entries carry paths folded since generation 0 and
  // match the recorder, which never evicts anything
  const GenFeatures& live = strat.context().back();
  const GenFeatures& rec = traj.features[5];
  CHECK(live.solution == rec.solution);
  CHECK(live.fitness == rec.fitness);
  CHECK(live.distribution == rec.distribution);

  // recomputing generation 5 against reset paths changes the path channels
  PathState cold_paths = make_path_state(3);
  GenFeatures cold = featurize_generation(traj.X[5], traj.F[5], traj.mu_pre[5],
                                          traj.sigma_pre[5], cold_paths);
  CHECK(cold.distribution != rec.distribution);
}

TEST_CASE("recorded trajectories replay the teacher bitwise") {
  for (auto algo : {TeacherAlgo::Snes, TeacherAlgo::SepCmaEs,
                    TeacherAlgo::OpenEs, TeacherAlgo::HillClimb}) {
    CAPTURE(teacher_name(algo));
    GeneratedTrajectory g = generate_teacher_trajectory(
        algo, sphere(5), 5, 8, 10, make_key(1234));
    REQUIRE(g.ok);
    REQUIRE(g.traj.generations() == 10);

    EsState st = make_es_state(g.traj.mu_pre[0], g.traj.sigma_pre[0]);
    for (int t = 0; t < 10; ++t) {
      CHECK(bitwise_equal(st.mu, g.traj.mu_pre[t]));
      CHECK(bitwise_equal(st.sigma, g.traj.sigma_pre[t]));
      st = tell_teacher(algo, st, g.traj.X[t], g.traj.F[t]);
      CHECK(bitwise_equal(st.mu, g.traj.mu_post[t]));
      CHECK(bitwise_equal(st.sigma, g.traj.sigma_post[t]));
    }
  }
}

TEST_CASE("trajectory state chains between generations") {
  GeneratedTrajectory g = generate_teacher_trajectory(
      TeacherAlgo::Snes, sphere(5), 5, 8, 12, make_key(77));
  REQUIRE(g.ok);
  for (int t = 0; t + 1 < g.traj.generations(); ++t) {
    CHECK(bitwise_equal(g.traj.mu_post[t], g.traj.mu_pre[t + 1]));
    CHECK(bitwise_equal(g.traj.sigma_post[t], g.traj.sigma_pre[t + 1]));
  }
  CHECK(bitwise_equal(g.traj.best_curve, g.result.best_so_far));
  CHECK(g.traj.features.size() == 12);
  CHECK(g.traj.features[3].N == 8);
  CHECK(g.traj.features[3].D == 5);
  CHECK(g.traj.final_best() == g.result.final_best());
  CHECK(g.traj.source == "snes");
}

TEST_CASE("identical keys give identical runs") {
  const Objective obj = bbob_objective(task(BbobFn::Rastrigin, 4, 0.5f));
  for (int rep = 0; rep < 2; ++rep) {
    TeacherStrategy s1(TeacherAlgo::SepCmaEs, Vec(4, 1.0f), Vec(4, 0.8f));
    TeacherStrategy s2(TeacherAlgo::SepCmaEs, Vec(4, 1.0f), Vec(4, 0.8f));
    RolloutResult a = run_strategy(s1, obj, 15, 10, make_key(2024));
    RolloutResult b = run_strategy(s2, obj, 15, 10, make_key(2024));
    CHECK(bitwise_equal(a.best_so_far, b.best_so_far));
    CHECK(bitwise_equal(a.final_mu, b.final_mu));
  }
}

TEST_CASE("snes on sphere reaches the reference fitness") {
  // frozen reference: median over 10 seeded runs of 300-generation SNES on
  // Sphere D=5 N=16 must land below 1e-3
  std::vector<float> finals;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng init(split(make_key(seed), 0));
    Vec mu0, sigma0;
    sample_init(init, 5, mu0, sigma0);
    TeacherStrategy s(TeacherAlgo::Snes, mu0, sigma0);
    RolloutResult r = run_strategy(s, sphere(5), 300, 16, make_key(seed));
    REQUIRE(!r.failed);
    finals.push_back(r.final_best());
  }
  std::sort(finals.begin(), finals.end());
  const float median = 0.5f * (finals[4] + finals[5]);
  CHECK(median < 1e-3f);
}

TEST_CASE("non-finite fitness stops the run and keeps the prefix") {
  int calls = 0;
  Objective exploding = [&calls](const Mat& X, Rng&) {
    Vec f(static_cast<std::size_t>(X.rows), 1.0f);
    if (++calls >= 4) f[0] = std::numeric_limits<float>::infinity();
    return f;
  };
  TeacherStrategy s(TeacherAlgo::Snes, Vec(3, 0.0f), Vec(3, 1.0f));
  RolloutResult r = run_strategy(s, exploding, 10, 6, make_key(3));
  CHECK(r.failed);
  CHECK(r.generations_completed == 3);
  CHECK(r.gen_best.size() == 3);
  CHECK(std::isfinite(r.final_best()));
}

TEST_CASE("invalid run shapes are rejected") {
  TeacherStrategy s(TeacherAlgo::Snes, Vec(3, 0.0f), Vec(3, 1.0f));
  CHECK_THROWS_AS(run_strategy(s, sphere(3), 0, 6, make_key(0)), ConfigError);
  CHECK_THROWS_AS(run_strategy(s, sphere(3), 5, 0, make_key(0)), ConfigError);
}

TEST_CASE("sample_init ranges and determinism") {
  Rng rng(make_key(11));
  for (int rep = 0; rep < 50; ++rep) {
    Vec mu, sigma;
    sample_init(rng, 6, mu, sigma);
    REQUIRE(mu.size() == 6);
    REQUIRE(sigma.size() == 6);
    for (float m : mu) {
      CHECK(m >= -3.0f);
      CHECK(m <= 3.0f);
    }
    CHECK(sigma[0] >= 0.25f);
    CHECK(sigma[0] <= 2.0f);
    for (float s : sigma) CHECK(s == sigma[0]);
  }
  Rng r1(make_key(4)), r2(make_key(4));
  Vec m1, s1, m2, s2;
  sample_init(r1, 5, m1, s1);
  sample_init(r2, 5, m2, s2);
  CHECK(bitwise_equal(m1, m2));
  CHECK(bitwise_equal(s1, s2));
}

TEST_CASE("model trajectory generation is reproducible") {
  ModelParams p = make_params(micro(), 2u);
  randomize_head(p, 6);

  GeneratedTrajectory a = generate_model_trajectory(
      p, sphere(5), 5, 6, 8, /*window=*/3, make_key(55));
  GeneratedTrajectory b = generate_model_trajectory(
      p, sphere(5), 5, 6, 8, /*window=*/3, make_key(55));
  REQUIRE(a.ok);
  REQUIRE(a.traj.generations() == 8);
  for (int t = 0; t < 8; ++t) {
    CHECK(bitwise_equal(a.traj.mu_post[t], b.traj.mu_post[t]));
    CHECK(bitwise_equal(a.traj.sigma_post[t], b.traj.sigma_post[t]));
  }
  CHECK(a.traj.source == "evotf");
}

TEST_CASE("objective adapters match their direct evaluations") {
  SUBCASE("bbob") {
    TaskSpec t = task(BbobFn::Rastrigin, 3, 0.4f);
    Objective obj = bbob_objective(t);
    Mat X(2, 3, 0.0f);
    for (int i = 0; i < 6; ++i) X.data[static_cast<std::size_t>(i)] = 0.3f * (i - 2);
    Rng rng(make_key(0));
    Vec f = obj(X, rng);
    CHECK(f[0] == eval_bbob(t, std::span<const float>(X.row(0), 3)));
    CHECK(f[1] == eval_bbob(t, std::span<const float>(X.row(1), 3)));
  }
  SUBCASE("control") {
    ControlTask t = make_cartpole(4);
    Objective obj = control_objective(t);
    const int dim = policy_param_count(t);
    Mat X(1, dim, 0.05f);
    Rng rng(make_key(0));
    Vec f = obj(X, rng);
    CHECK(f[0] == eval_policy(t, std::span<const float>(X.row(0), X.cols)));
  }
  SUBCASE("random fitness ignores X but not the rng") {
    Objective obj = random_fitness_objective();
    Mat X(3, 2, 1.0f);
    Rng r1(make_key(9)), r2(make_key(9));
    Vec f1 = obj(X, r1), f2 = obj(X, r2);
    CHECK(bitwise_equal(f1, f2));
    Vec f3 = obj(X, r1);  // same rng advanced: different draws
    CHECK_FALSE(bitwise_equal(f1, f3));
  }
  SUBCASE("linear sum") {
    Objective obj = linear_sum_objective();
    Mat X(1, 3, 0.0f);
    X.data = {1.0f, -2.0f, 0.5f};
    Rng rng(make_key(0));
    CHECK(obj(X, rng)[0] == doctest::Approx(-0.5f));
  }
}

TEST_SUITE_END();
