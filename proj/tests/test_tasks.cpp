#include <doctest.h>

#include <cmath>
#include <cstring>
#include <map>

#include "evotf/errors.hpp"
#include "evotf/tasks.hpp"

using namespace evotf;

namespace {

TaskSpec spec_of(BbobFn fn, Vec offset) {
  TaskSpec s;
  s.fn = fn;
  s.dims = static_cast<int>(offset.size());
  s.offset = std::move(offset);
  return s;
}

}  // namespace

TEST_SUITE("tasks") {

TEST_CASE("optima are where they should be") {
  const Vec b{0.4f, -1.2f, 2.0f, 0.0f};
  Vec at_b = b;
  Vec at_b_plus1 = b;
  for (float& v : at_b_plus1) v += 1.0f;

  // minimum 0 at x=b
  for (BbobFn fn : {BbobFn::Sphere, BbobFn::Discus, BbobFn::Rastrigin,
                    BbobFn::BuecheRastrigin, BbobFn::AttractiveSector,
                    BbobFn::Weierstrass, BbobFn::SchaffersF7}) {
    CAPTURE(bbob_name(fn));
    CHECK(std::abs(eval_bbob(spec_of(fn, b), at_b)) < 1e-5);
  }
  // minimum 0 at x=b+1 (classic Rosenbrock form on z)
  for (BbobFn fn : {BbobFn::Rosenbrock, BbobFn::GriewankRosen}) {
    CAPTURE(bbob_name(fn));
    CHECK(std::abs(eval_bbob(spec_of(fn, b), at_b_plus1)) < 1e-5);
  }
  // Schwefel: documented optimizer at b + 420.9687462275036 per coordinate
  Vec at_schwefel = b;
  for (float& v : at_schwefel) v += 420.9687462275036f;
  CHECK(std::abs(eval_bbob(spec_of(BbobFn::Schwefel, b), at_schwefel)) < 1e-3);

  // positive away from the optimum
  Vec off = at_b;
  off[0] += 0.7f;
  for (BbobFn fn : task_set_members(TaskSetName::Large)) {
    CAPTURE(bbob_name(fn));
    CHECK(eval_bbob(spec_of(fn, b), off) > 0.0f);
  }
}

TEST_CASE("rastrigin value matches a direct formula evaluation") {
  // f(0.5, 0, 0) = 10*(3 - (cos(pi) + 2)) + 0.25 = 20.25
  CHECK(eval_bbob(spec_of(BbobFn::Rastrigin, {0, 0, 0}), Vec{0.5f, 0, 0}) ==
        doctest::Approx(20.25).epsilon(1e-6));
}

TEST_CASE("translation identity is exact") {
  Rng rng(31u);
  for (BbobFn fn : task_set_members(TaskSetName::Large)) {
    Vec b(5), x(5);
    rng.fill_uniform(b, -3.0f, 3.0f);
    rng.fill_uniform(x, -4.0f, 4.0f);
    Vec shifted(5);
    for (int i = 0; i < 5; ++i)
      shifted[static_cast<std::size_t>(i)] =
          x[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)];
    const float f1 = eval_bbob(spec_of(fn, b), x);
    const float f2 = eval_bbob(spec_of(fn, Vec(5, 0.0f)), shifted);
    CHECK(std::memcmp(&f1, &f2, sizeof(float)) == 0);
  }
}

TEST_CASE("dimension mismatch is rejected") {
  CHECK_THROWS_AS(eval_bbob(spec_of(BbobFn::Sphere, {0, 0}), Vec{1.0f}),
                  std::invalid_argument);
}

TEST_CASE("task sets nest and sampling is uniform") {
  CHECK(task_set_members(TaskSetName::Small).size() == 1);
  CHECK(task_set_members(TaskSetName::Medium).size() == 5);
  CHECK(task_set_members(TaskSetName::Large).size() == 10);
  CHECK_THROWS_AS(task_set_from_name("huge"), ConfigError);

  Rng rng(7u);
  std::map<BbobFn, int> counts;
  double offset_sum = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    TaskSpec t = sample_task(TaskSetName::Medium, 5, rng);
    counts[t.fn]++;
    for (float v : t.offset) {
      CHECK(v >= -3.0f);
      CHECK(v < 3.0f);
      offset_sum += v;
    }
  }
  for (const auto& [fn, c] : counts) {
    CAPTURE(bbob_name(fn));
    CHECK(std::abs(c / static_cast<double>(n) - 0.2) < 0.02);
  }
  CHECK(std::abs(offset_sum / (n * 5.0)) < 0.05);

  Rng rng2(8u);
  for (int i = 0; i < 100; ++i) {
    CHECK(sample_task(TaskSetName::Small, 3, rng2).fn == BbobFn::Sphere);
  }
}

TEST_CASE("policy evaluation is a pure function of weights and seed") {
  ControlTask cp = make_cartpole(11u);
  CHECK(policy_param_count(cp) == 4 * 16 + 16 + 16 * 16 + 16 + 16 + 1);
  Vec zeros(static_cast<std::size_t>(policy_param_count(cp)), 0.0f);
  const float f1 = eval_policy(cp, zeros);
  const float f2 = eval_policy(cp, zeros);
  CHECK(std::memcmp(&f1, &f2, sizeof(float)) == 0);
  CHECK(f1 >= -200.0f);  // reward is 1 per step, 200 steps max
  CHECK(f1 < 0.0f);      // at least one step survived

  ControlTask pd = make_pendulum(11u);
  Vec zeros_pd(static_cast<std::size_t>(policy_param_count(pd)), 0.0f);
  const float fp = eval_policy(pd, zeros_pd);
  CHECK(std::isfinite(fp));
  CHECK(fp > 0.0f);  // swing-up cost is positive with zero torque

  CHECK_THROWS_AS(eval_policy(cp, Vec{1.0f, 2.0f}), std::invalid_argument);
}

TEST_CASE("a pole-angle controller beats the zero policy on cartpole") {
  ControlTask cp = make_cartpole(3u);
  Vec w(static_cast<std::size_t>(policy_param_count(cp)), 0.0f);
  // route 5*theta + 1*theta_dot through hidden unit 0 of both layers
  w[2 * 16 + 0] = 5.0f;   // theta -> h1_0
  w[3 * 16 + 0] = 1.0f;   // theta_dot -> h1_0
  w[80 + 0] = 4.0f;       // h1_0 -> h2_0
  w[352 + 0] = 1.0f;      // h2_0 -> output
  const float controller = eval_policy(cp, w);
  Vec zeros(w.size(), 0.0f);
  const float zero_policy = eval_policy(cp, zeros);
  CHECK(controller < zero_policy);  // lower fitness = longer survival
}

}  // TEST_SUITE
