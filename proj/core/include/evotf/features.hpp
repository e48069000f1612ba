#pragma once

#include <array>
#include <limits>

#include "evotf/array.hpp"

namespace evotf {

inline constexpr int kDX = 5;   // solution feature channels
inline constexpr int kDF = 6;   // fitness feature channels
inline constexpr int kDD = 10;  // distribution feature channels
inline constexpr std::array<float, 3> kPathTimescales{0.1f, 0.5f, 0.9f};

// Cross-generation recurrent state.  Paths are exponential accumulators of
// the SNES gradients; best-so-far tracks the lowest fitness ever seen.
struct PathState {
  std::array<Vec, 3> p_mu;
  std::array<Vec, 3> p_sigma;
  Vec best_x;
  float best_f{std::numeric_limits<float>::infinity()};
  int generation{0};
};

PathState make_path_state(int dims);

// One generation's worth of encoder inputs.
// solution: [N, D, kDX]; fitness: [N, kDF]; distribution: [D, kDD];
// all row-major.
struct GenFeatures {
  int N{0};
  int D{0};
  Vec solution;
  Vec fitness;
  Vec distribution;
};

// Channels per (i, d): [s, s^2, (x - x_genbest)/sigma, (x - x_bestsofar)/sigma,
// clip(s, -5, 5)] with s = (x_id - mu_d)/sigma_d.  `best_x` must already
// include the current generation.
Vec solution_features(const Mat& X, const Vec& F, const Vec& mu,
                      const Vec& sigma, const Vec& best_x);

// Channels per i: [improved vs prev best, z-score, centered rank,
// range-normalized - 0.5, SNES utility by rank, argmin flag].
// `best_f_prev` is the best fitness seen before this generation.
Vec fitness_features(const Vec& F, float best_f_prev);

// Channels per d: [fd gradient, SNES mu-gradient, SNES sigma-gradient,
// p_mu x3 timescales, p_sigma x3, ln sigma_d - mean_d ln sigma].  Reads the
// paths as they were BEFORE this generation.
Vec distribution_features(const Mat& X, const Vec& F, const Vec& mu,
                          const Vec& sigma, const PathState& ps);

// Full per-generation featurization with the documented ordering: fitness
// features against the pre-update best, best-so-far update, solution
// features, distribution features against pre-update paths, path update,
// generation increment.
GenFeatures featurize_generation(const Mat& X, const Vec& F, const Vec& mu,
                                 const Vec& sigma, PathState& ps);

}  // namespace evotf
