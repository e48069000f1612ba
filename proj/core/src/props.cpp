#include "evotf/props.hpp"

#include <algorithm>
#include <cmath>

namespace evotf {

namespace {

float median(Vec v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5f * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

StrategyFactory teacher_factory(TeacherAlgo algo) {
  return [algo](Vec mu0, Vec sigma0) -> std::unique_ptr<AskTellOptimizer> {
    return std::make_unique<TeacherStrategy>(algo, std::move(mu0),
                                             std::move(sigma0));
  };
}

StrategyFactory model_factory(ModelParams params, int window, float eta_mu,
                              float eta_sigma) {
  return [params, window, eta_mu,
          eta_sigma](Vec mu0, Vec sigma0) -> std::unique_ptr<AskTellOptimizer> {
    return std::make_unique<EvoTfStrategy>(params, std::move(mu0),
                                           std::move(sigma0), window, eta_mu,
                                           eta_sigma);
  };
}

UnbiasednessReport check_unbiasedness(const StrategyFactory& make, int trials,
                                      int dims, int pop, int gens,
                                      std::uint64_t seed) {
  const RngKey root = split(make_key(seed), 0xD41F7);
  Objective noise = random_fitness_objective();
  Mat drifts(trials, dims);
  for (int r = 0; r < trials; ++r) {
    const RngKey key = split(root, static_cast<std::uint64_t>(r));
    Rng init_rng(split(key, 0));
    Vec mu0, sigma0;
    sample_init(init_rng, dims, mu0, sigma0);
    auto strategy = make(mu0, sigma0);
    RolloutResult res = run_strategy(*strategy, noise, gens, pop, key);
    for (int d = 0; d < dims; ++d)
      drifts.at(r, d) =
          res.final_mu[static_cast<std::size_t>(d)] -
          mu0[static_cast<std::size_t>(d)];
  }

  UnbiasednessReport rep;
  rep.trials = trials;
  rep.mean_drift.resize(static_cast<std::size_t>(dims));
  rep.stderr_per_coord.resize(static_cast<std::size_t>(dims));
  rep.pass = true;
  for (int d = 0; d < dims; ++d) {
    double m = 0.0;
    for (int r = 0; r < trials; ++r) m += drifts.at(r, d);
    m /= trials;
    double ss = 0.0;
    for (int r = 0; r < trials; ++r) {
      const double e = drifts.at(r, d) - m;
      ss += e * e;
    }
    const double se =
        trials > 1 ? std::sqrt(ss / (trials - 1.0) / trials) : 0.0;
    rep.mean_drift[static_cast<std::size_t>(d)] = static_cast<float>(m);
    rep.stderr_per_coord[static_cast<std::size_t>(d)] =
        static_cast<float>(se);
    if (std::abs(m) > 3.0 * se) rep.pass = false;
  }
  return rep;
}

TranslationReport check_translation_invariance(const StrategyFactory& make,
                                               std::vector<float> offsets,
                                               int trials, int dims, int pop,
                                               int gens, std::uint64_t seed) {
  const RngKey root = split(make_key(seed), 0x7A4A5);
  TranslationReport rep;
  rep.offsets = offsets;
  for (float off : offsets) {
    Vec finals, dists;
    for (int r = 0; r < trials; ++r) {
      // identical key per trial index across offsets: common random numbers
      const RngKey key = split(root, static_cast<std::uint64_t>(r));
      Rng init_rng(split(key, 0));
      Vec mu0, sigma0;
      sample_init(init_rng, dims, mu0, sigma0);
      for (float& m : mu0) m += off;
      TaskSpec task{BbobFn::Sphere, dims,
                    Vec(static_cast<std::size_t>(dims), off), 0};
      auto strategy = make(mu0, sigma0);
      RolloutResult res =
          run_strategy(*strategy, bbob_objective(task), gens, pop, key);
      finals.push_back(res.final_best());
      double d2 = 0.0;
      for (float m : res.final_mu) {
        const double e = static_cast<double>(m) - off;
        d2 += e * e;
      }
      dists.push_back(static_cast<float>(std::sqrt(d2)));
    }
    rep.median_final.push_back(median(finals));
    rep.median_dist.push_back(median(dists));
  }
  const auto [lo, hi] =
      std::minmax_element(rep.median_final.begin(), rep.median_final.end());
  rep.ratio = (*hi + 1e-12f) / (*lo + 1e-12f);
  rep.pass = rep.ratio <= 2.0f;
  return rep;
}

ScaleReport check_scale_adaptation(const StrategyFactory& make, int trials,
                                   int dims, int pop, int gens,
                                   std::uint64_t seed) {
  const RngKey root = split(make_key(seed), 0x5CA1E);
  Objective slope = linear_sum_objective();
  Vec first, last;
  for (int r = 0; r < trials; ++r) {
    const RngKey key = split(root, static_cast<std::uint64_t>(r));
    Rng init_rng(split(key, 0));
    Vec mu0, sigma0;
    sample_init(init_rng, dims, mu0, sigma0);
    auto strategy = make(mu0, sigma0);
    Trajectory traj;
    run_strategy(*strategy, slope, gens, pop, key, &traj);
    first.push_back(vec_mean(traj.sigma_post.front()));
    last.push_back(vec_mean(traj.sigma_post.back()));
  }
  ScaleReport rep;
  rep.median_first = median(first);
  rep.median_last = median(last);
  rep.pass = rep.median_last > rep.median_first;
  return rep;
}

}  // namespace evotf
