#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "evotf/errors.hpp"
#include "evotf/tasks.hpp"
#include "evotf/teachers.hpp"

using namespace evotf;

namespace {

bool states_equal(const EsState& a, const EsState& b) {
  return a.mu.size() == b.mu.size() &&
         std::memcmp(a.mu.data(), b.mu.data(), a.mu.size() * 4) == 0 &&
         std::memcmp(a.sigma.data(), b.sigma.data(), a.sigma.size() * 4) == 0;
}

Vec sphere_fitness(const Mat& X) {
  Vec f(static_cast<std::size_t>(X.rows));
  for (int i = 0; i < X.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < X.cols; ++j) s += static_cast<double>(X.at(i, j)) * X.at(i, j);
    f[static_cast<std::size_t>(i)] = static_cast<float>(s);
  }
  return f;
}

float run_sphere(TeacherAlgo algo, int gens, std::uint64_t seed) {
  EsState st = make_es_state(Vec(5, 2.0f), Vec(5, 1.0f));
  Rng rng(seed);
  float best = std::numeric_limits<float>::infinity();
  for (int g = 0; g < gens; ++g) {
    Mat X = ask_teacher(algo, st, rng, 16);
    Vec F = sphere_fitness(X);
    best = std::min(best, *std::min_element(F.begin(), F.end()));
    st = tell_teacher(algo, st, X, F);
  }
  return best;
}

}  // namespace

TEST_SUITE("teachers") {

TEST_CASE("snes utilities: worked values and zero sum") {
  const Vec u2 = snes_utilities(2);
  CHECK(u2[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(u2[1] == doctest::Approx(-0.5).epsilon(1e-6));

  const Vec u4 = snes_utilities(4);
  const Vec expect{0.4805f, 0.0196f, -0.25f, -0.25f};
  for (int i = 0; i < 4; ++i) {
    CHECK(u4[static_cast<std::size_t>(i)] ==
          doctest::Approx(expect[static_cast<std::size_t>(i)]).epsilon(2e-4));
  }
  for (int n : {2, 3, 10, 64}) {
    const Vec u = snes_utilities(n);
    CHECK(std::abs(std::accumulate(u.begin(), u.end(), 0.0)) < 1e-6);
  }
}

TEST_CASE("snes worked example: D=1 step") {
  EsState st = make_es_state({0.0f}, {1.0f});
  Mat X(2, 1);
  X.at(0, 0) = 1.0f;
  X.at(1, 0) = -1.0f;
  const Vec F{-1.0f, 1.0f};  // s=+1 is best
  const EsState next = tell_snes(st, X, F, 1.0f, 1.0f);
  CHECK(next.mu[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(next.sigma[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(next.generation == 1);
}

TEST_CASE("ask statistics and the sigma->0 limit") {
  EsState st = make_es_state({1.0f, -2.0f}, {0.5f, 2.0f});
  Rng rng(5u);
  const int n = 100000;
  double s0 = 0.0, s1 = 0.0;
  Mat X = ask_gaussian(st, rng, n);
  for (int i = 0; i < n; ++i) {
    s0 += X.at(i, 0);
    s1 += X.at(i, 1);
  }
  CHECK(std::abs(s0 / n - 1.0) < 3.0 * 0.5 / std::sqrt(n));
  CHECK(std::abs(s1 / n + 2.0) < 3.0 * 2.0 / std::sqrt(n));

  EsState tiny = make_es_state({3.0f}, {1e-30f});
  Mat Xt = ask_gaussian(tiny, rng, 4);
  for (int i = 0; i < 4; ++i) CHECK(Xt.at(i, 0) == doctest::Approx(3.0f));
}

TEST_CASE("antithetic pairs mirror through mu; odd N rejected") {
  EsState st = make_es_state({0.0f, 0.0f, 0.0f}, {1.0f, 2.0f, 0.3f});
  Rng rng(9u);
  Mat X = ask_antithetic(st, rng, 8);
  for (int i = 0; i < 8; i += 2) {
    for (int j = 0; j < 3; ++j) {
      // mu = 0, so mirroring is exact in floating point
      CHECK(X.at(i, j) == -X.at(i + 1, j));
    }
  }
  CHECK_THROWS_AS(ask_antithetic(st, rng, 5), std::invalid_argument);
}

TEST_CASE("openes: descent direction, fixed sigma, pairing enforced") {
  EsState st = make_es_state({0.0f}, {1.0f});
  Mat X(2, 1);
  X.at(0, 0) = 1.0f;   // z=+1
  X.at(1, 0) = -1.0f;  // z=-1
  const Vec F{-1.0f, 1.0f};  // lower f at z=+1 -> g<0 -> mu moves up
  const EsState next = tell_openes(st, X, F, 0.05f);
  CHECK(next.mu[0] > 0.0f);
  CHECK(next.sigma[0] == st.sigma[0]);

  Mat bad(2, 1);
  bad.at(0, 0) = 1.0f;
  bad.at(1, 0) = 0.7f;
  CHECK_THROWS_AS(tell_openes(st, bad, F, 0.05f), std::invalid_argument);
}

TEST_CASE("hillclimb: elitist adoption and sigma decay") {
  EsState st = make_es_state({0.0f, 0.0f}, {1.0f, 1.0f});
  Mat X(3, 2);
  X.at(0, 0) = 1.0f; X.at(0, 1) = 1.0f;
  X.at(1, 0) = 0.2f; X.at(1, 1) = -0.1f;
  X.at(2, 0) = 2.0f; X.at(2, 1) = 2.0f;
  EsState s1 = tell_hillclimb(st, X, Vec{3.0f, 1.0f, 9.0f});
  CHECK(s1.mu[0] == 0.2f);  // adopted row bitwise
  CHECK(s1.mu[1] == -0.1f);
  CHECK(s1.best_f == 1.0f);

  // stagnation: all candidates worse -> mu frozen, sigma decays
  EsState cur = s1;
  for (int g = 0; g < 100; ++g) {
    cur = tell_hillclimb(cur, X, Vec{5.0f, 6.0f, 7.0f});
  }
  CHECK(cur.mu[0] == 0.2f);
  float expect_sigma = s1.sigma[0];
  for (int g = 0; g < 100; ++g) expect_sigma *= 0.999f;
  CHECK(cur.sigma[0] == doctest::Approx(expect_sigma).epsilon(1e-6));
}

TEST_CASE("population permutation leaves every tell unchanged") {
  Rng rng(21u);
  EsState st = make_es_state({0.5f, -1.0f, 2.0f}, {1.0f, 0.5f, 2.0f});
  const int n = 8;
  Mat X = ask_gaussian(st, rng, n);
  Vec F(static_cast<std::size_t>(n));
  rng.fill_uniform(F, 0.0f, 10.0f);  // tie-free with probability 1

  // block permutation (pairs move together) keeps openes happy too
  const std::vector<int> perm{4, 5, 2, 3, 6, 7, 0, 1};
  Mat Xp(n, 3);
  Vec Fp(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Fp[static_cast<std::size_t>(i)] = F[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    for (int j = 0; j < 3; ++j) Xp.at(i, j) = X.at(perm[static_cast<std::size_t>(i)], j);
  }

  for (TeacherAlgo algo : {TeacherAlgo::Snes, TeacherAlgo::SepCmaEs,
                           TeacherAlgo::HillClimb}) {
    CAPTURE(teacher_name(algo));
    CHECK(states_equal(tell_teacher(algo, st, X, F),
                       tell_teacher(algo, st, Xp, Fp)));
  }
  // openes needs mirrored pairs; block permutation keeps pairs intact.
  // it also sums in index order, so only approximate equality holds.
  Mat Xa = ask_antithetic(st, rng, n);
  Mat Xap(n, 3);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 3; ++j)
      Xap.at(i, j) = Xa.at(perm[static_cast<std::size_t>(i)], j);
  EsState a = tell_openes(st, Xa, F);
  EsState b = tell_openes(st, Xap, Fp);
  for (int j = 0; j < 3; ++j) {
    CHECK(a.mu[static_cast<std::size_t>(j)] ==
          doctest::Approx(b.mu[static_cast<std::size_t>(j)]).epsilon(1e-5));
  }
}

TEST_CASE("sigma stays positive under random telling") {
  Rng rng(33u);
  for (TeacherAlgo algo : {TeacherAlgo::Snes, TeacherAlgo::SepCmaEs,
                           TeacherAlgo::OpenEs, TeacherAlgo::HillClimb}) {
    EsState st = make_es_state(Vec(4, 0.0f), Vec(4, 1.0f));
    for (int g = 0; g < 50; ++g) {
      Mat X = ask_teacher(algo, st, rng, 8);
      Vec F(8);
      rng.fill_uniform(F, -5.0f, 5.0f);
      st = tell_teacher(algo, st, X, F);
      for (float s : st.sigma) CHECK(s > 0.0f);
    }
  }
}

TEST_CASE("every teacher makes progress on sphere") {
  for (TeacherAlgo algo : {TeacherAlgo::Snes, TeacherAlgo::SepCmaEs,
                           TeacherAlgo::OpenEs, TeacherAlgo::HillClimb}) {
    CAPTURE(teacher_name(algo));
    std::vector<float> early, late;
    for (std::uint64_t s = 0; s < 10; ++s) {
      early.push_back(run_sphere(algo, 20, s));
      late.push_back(run_sphere(algo, 200, s));
    }
    std::sort(early.begin(), early.end());
    std::sort(late.begin(), late.end());
    CHECK(late[5] < early[5]);  // median improves with budget
  }
}

TEST_CASE("replaying recorded generations reproduces states bitwise") {
  Rng rng(77u);
  for (TeacherAlgo algo : {TeacherAlgo::Snes, TeacherAlgo::SepCmaEs,
                           TeacherAlgo::OpenEs, TeacherAlgo::HillClimb}) {
    CAPTURE(teacher_name(algo));
    EsState st = make_es_state(Vec(3, 1.0f), Vec(3, 0.7f));
    std::vector<Mat> xs;
    std::vector<Vec> fs;
    std::vector<EsState> states{st};
    for (int g = 0; g < 10; ++g) {
      Mat X = ask_teacher(algo, st, rng, 6);
      Vec F = sphere_fitness(X);
      st = tell_teacher(algo, st, X, F);
      xs.push_back(std::move(X));
      fs.push_back(std::move(F));
      states.push_back(st);
    }
    EsState replay = states[0];
    for (int g = 0; g < 10; ++g) {
      replay = tell_teacher(algo, replay, xs[static_cast<std::size_t>(g)],
                            fs[static_cast<std::size_t>(g)]);
      CHECK(states_equal(replay, states[static_cast<std::size_t>(g) + 1]));
    }
  }
}

TEST_CASE("teacher names round-trip; unknown rejected") {
  for (TeacherAlgo a : {TeacherAlgo::Snes, TeacherAlgo::SepCmaEs,
                        TeacherAlgo::OpenEs, TeacherAlgo::HillClimb}) {
    CHECK(teacher_from_name(teacher_name(a)) == a);
  }
  CHECK_THROWS_AS(teacher_from_name("simulated-annealing"), ConfigError);
}

}  // TEST_SUITE
