#include <doctest.h>

#include <cmath>

#include "evotf/features.hpp"
#include "evotf/rng.hpp"
#include "evotf/teachers.hpp"

using namespace evotf;

namespace {

struct Setup {
  Mat X;
  Vec F;
  Vec mu;
  Vec sigma;
};

Setup random_setup(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  Setup s;
  s.mu.resize(static_cast<std::size_t>(d));
  s.sigma.resize(static_cast<std::size_t>(d));
  rng.fill_uniform(s.mu, -2.0f, 2.0f);
  rng.fill_uniform(s.sigma, 0.3f, 2.0f);
  s.X = Mat(n, d);
  rng.fill_normal(s.X.data);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      s.X.at(i, j) = s.mu[static_cast<std::size_t>(j)] +
                     s.sigma[static_cast<std::size_t>(j)] * s.X.at(i, j);
    }
  s.F.resize(static_cast<std::size_t>(n));
  rng.fill_uniform(s.F, -3.0f, 7.0f);
  return s;
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("fitness z-scores match the worked example") {
  PathState ps = make_path_state(2);
  const Vec f = fitness_features({1.0f, 2.0f, 3.0f}, ps.best_f);
  CHECK(f[0 * kDF + 1] == doctest::Approx(-1.2247).epsilon(1e-3));
  CHECK(f[1 * kDF + 1] == doctest::Approx(0.0).epsilon(1e-4));
  CHECK(f[2 * kDF + 1] == doctest::Approx(1.2247).epsilon(1e-3));
  // centered rank
  CHECK(f[0 * kDF + 2] == doctest::Approx(-0.5));
  CHECK(f[2 * kDF + 2] == doctest::Approx(0.5));
}

TEST_CASE("constant fitness: z 0, range -0.5, single argmin flag") {
  const Vec f = fitness_features({4.0f, 4.0f, 4.0f, 4.0f},
                                 std::numeric_limits<float>::infinity());
  int argmin_flags = 0;
  for (int i = 0; i < 4; ++i) {
    CHECK(f[static_cast<std::size_t>(i) * kDF + 1] == doctest::Approx(0.0));
    CHECK(f[static_cast<std::size_t>(i) * kDF + 3] == doctest::Approx(-0.5));
    argmin_flags += f[static_cast<std::size_t>(i) * kDF + 5] == 1.0f;
  }
  CHECK(argmin_flags == 1);
  CHECK(f[0 * kDF + 5] == 1.0f);  // lowest index wins ties
}

TEST_CASE("fitness channels are invariant to positive affine transforms") {
  Setup s = random_setup(6, 2, 3u);
  const Vec a = fitness_features(s.F, 100.0f);
  Vec f2 = s.F;
  for (float& v : f2) v = 2.0f * v + 3.0f;
  const Vec b = fitness_features(f2, 2.0f * 100.0f + 3.0f);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-4));
  }
}

TEST_CASE("solution channels: zero at the mean, clipping at |s|=5") {
  Vec mu{1.0f, -1.0f};
  Vec sigma{1.0f, 2.0f};
  Mat X(2, 2);
  X.at(0, 0) = 1.0f;  X.at(0, 1) = -1.0f;   // equals mu
  X.at(1, 0) = 8.0f;  X.at(1, 1) = -1.0f;   // s = 7 in dim 0
  const Vec F{0.0f, 1.0f};
  const Vec feats = solution_features(X, F, mu, sigma, mu);
  CHECK(feats[0] == 0.0f);                       // s
  CHECK(feats[1] == 0.0f);                       // s^2
  CHECK(feats[(1 * 2 + 0) * kDX + 0] == 7.0f);   // raw s
  CHECK(feats[(1 * 2 + 0) * kDX + 4] == 5.0f);   // clipped
}

TEST_CASE("generation 0 has zero paths; constant gradient gives 0.75g at c=0.5") {
  Setup s = random_setup(8, 3, 11u);
  PathState ps = make_path_state(3);
  GenFeatures g0 = featurize_generation(s.X, s.F, s.mu, s.sigma, ps);
  for (int j = 0; j < 3; ++j) {
    for (int c = 0; c < 6; ++c) {
      CHECK(g0.distribution[static_cast<std::size_t>(j) * kDD + 3 +
                            static_cast<std::size_t>(c)] == 0.0f);
    }
  }
  const float gm0 = g0.distribution[0 * kDD + 1];  // SNES mu-gradient, dim 0

  // same generation data again -> same gradient; p(c=0.5) = 0.75 g after two
  featurize_generation(s.X, s.F, s.mu, s.sigma, ps);
  CHECK(ps.p_mu[1][0] == doctest::Approx(0.75f * gm0).epsilon(1e-5));
  CHECK(ps.generation == 2);

  // the third featurization must see 0.75g in its pre-update channels
  GenFeatures g2 = featurize_generation(s.X, s.F, s.mu, s.sigma, ps);
  CHECK(g2.distribution[0 * kDD + 4] == doctest::Approx(0.75f * gm0).epsilon(1e-5));
}

TEST_CASE("population permutation permutes rows and fixes distribution") {
  Setup s = random_setup(6, 3, 17u);
  PathState ps1 = make_path_state(3);
  GenFeatures a = featurize_generation(s.X, s.F, s.mu, s.sigma, ps1);

  const std::vector<int> perm{3, 1, 5, 0, 2, 4};
  Mat Xp(6, 3);
  Vec Fp(6);
  for (int i = 0; i < 6; ++i) {
    Fp[static_cast<std::size_t>(i)] =
        s.F[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    for (int j = 0; j < 3; ++j)
      Xp.at(i, j) = s.X.at(perm[static_cast<std::size_t>(i)], j);
  }
  PathState ps2 = make_path_state(3);
  GenFeatures b = featurize_generation(Xp, Fp, s.mu, s.sigma, ps2);

  for (int i = 0; i < 6; ++i) {
    const auto src = static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]);
    for (int j = 0; j < 3; ++j)
      for (int c = 0; c < kDX; ++c) {
        CHECK(b.solution[(static_cast<std::size_t>(i) * 3 + static_cast<std::size_t>(j)) * kDX +
                         static_cast<std::size_t>(c)] ==
              a.solution[(src * 3 + static_cast<std::size_t>(j)) * kDX +
                         static_cast<std::size_t>(c)]);
      }
    for (int c = 0; c < kDF; ++c) {
      CHECK(b.fitness[static_cast<std::size_t>(i) * kDF + static_cast<std::size_t>(c)] ==
            a.fitness[src * kDF + static_cast<std::size_t>(c)]);
    }
  }
  // gradient channels are population sums; accumulation order may shift by an ulp
  for (std::size_t k = 0; k < a.distribution.size(); ++k) {
    CHECK(a.distribution[k] == doctest::Approx(b.distribution[k]).epsilon(1e-5));
  }
}

TEST_CASE("dimension permutation permutes the D axis of the features") {
  Setup s = random_setup(5, 4, 23u);
  PathState ps1 = make_path_state(4);
  GenFeatures a = featurize_generation(s.X, s.F, s.mu, s.sigma, ps1);

  const std::vector<int> perm{2, 0, 3, 1};
  Mat Xp(5, 4);
  Vec mup(4), sigp(4);
  for (int j = 0; j < 4; ++j) {
    const auto src = static_cast<std::size_t>(perm[static_cast<std::size_t>(j)]);
    mup[static_cast<std::size_t>(j)] = s.mu[src];
    sigp[static_cast<std::size_t>(j)] = s.sigma[src];
    for (int i = 0; i < 5; ++i) Xp.at(i, j) = s.X.at(i, static_cast<int>(src));
  }
  PathState ps2 = make_path_state(4);
  GenFeatures b = featurize_generation(Xp, s.F, mup, sigp, ps2);

  for (int j = 0; j < 4; ++j) {
    const auto src = static_cast<std::size_t>(perm[static_cast<std::size_t>(j)]);
    for (int c = 0; c < kDD; ++c) {
      CHECK(b.distribution[static_cast<std::size_t>(j) * kDD + static_cast<std::size_t>(c)] ==
            a.distribution[src * kDD + static_cast<std::size_t>(c)]);
    }
    for (int i = 0; i < 5; ++i)
      for (int c = 0; c < kDX; ++c) {
        CHECK(b.solution[(static_cast<std::size_t>(i) * 4 + static_cast<std::size_t>(j)) * kDX +
                         static_cast<std::size_t>(c)] ==
              a.solution[(static_cast<std::size_t>(i) * 4 + src) * kDX +
                         static_cast<std::size_t>(c)]);
      }
  }
}

TEST_CASE("improvement flag uses the pre-generation best") {
  PathState ps = make_path_state(2);
  ps.best_f = 2.0f;
  Mat X(3, 2, 0.0f);
  X.at(1, 0) = 0.5f;
  Vec F{1.0f, 3.0f, 2.0f};  // only candidate 0 improves on 2.0
  GenFeatures g = featurize_generation(X, F, Vec(2, 0.0f), Vec(2, 1.0f), ps);
  CHECK(g.fitness[0 * kDF + 0] == 1.0f);
  CHECK(g.fitness[1 * kDF + 0] == 0.0f);
  CHECK(g.fitness[2 * kDF + 0] == 0.0f);
  CHECK(ps.best_f == 1.0f);  // updated after the flags were computed
}

TEST_CASE("features stay finite at the sigma floor") {
  Setup s = random_setup(6, 3, 29u);
  Vec tiny_sigma(3, 1e-8f);
  PathState ps = make_path_state(3);
  GenFeatures g = featurize_generation(s.X, s.F, s.mu, tiny_sigma, ps);
  for (const Vec* v : {&g.solution, &g.fitness, &g.distribution}) {
    for (float x : *v) CHECK(std::isfinite(x));
  }
}

}  // TEST_SUITE
