#include "evotf/rollout.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "evotf/errors.hpp"

namespace evotf {

namespace {

constexpr float kInf = std::numeric_limits<float>::infinity();
constexpr float kSigmaFloor = 1e-8f;

bool all_finite(const Vec& v) {
  return std::all_of(v.begin(), v.end(),
                     [](float x) { return std::isfinite(x); });
}

}  // namespace

Objective bbob_objective(const TaskSpec& task) {
  return [task](const Mat& X, Rng&) {
    Vec f(static_cast<std::size_t>(X.rows));
    for (int i = 0; i < X.rows; ++i)
      f[static_cast<std::size_t>(i)] =
          eval_bbob(task, {X.row(i), static_cast<std::size_t>(X.cols)});
    return f;
  };
}

Objective control_objective(const ControlTask& task) {
  return [task](const Mat& X, Rng&) {
    Vec f(static_cast<std::size_t>(X.rows));
    for (int i = 0; i < X.rows; ++i)
      f[static_cast<std::size_t>(i)] =
          eval_policy(task, {X.row(i), static_cast<std::size_t>(X.cols)});
    return f;
  };
}

Objective random_fitness_objective() {
  return [](const Mat& X, Rng& rng) {
    Vec f(static_cast<std::size_t>(X.rows));
    rng.fill_normal(f);
    return f;
  };
}

Objective linear_sum_objective() {
  return [](const Mat& X, Rng&) {
    Vec f(static_cast<std::size_t>(X.rows));
    for (int i = 0; i < X.rows; ++i) {
      double s = 0.0;
      for (int d = 0; d < X.cols; ++d) s += X.at(i, d);
      f[static_cast<std::size_t>(i)] = static_cast<float>(s);
    }
    return f;
  };
}

TeacherStrategy::TeacherStrategy(TeacherAlgo algo, Vec mu0, Vec sigma0)
    : algo_(algo), state_(make_es_state(std::move(mu0), std::move(sigma0))) {}

Mat TeacherStrategy::ask(Rng& rng, int n) {
  return ask_teacher(algo_, state_, rng, n);
}

void TeacherStrategy::tell(const Mat& X, const Vec& F) {
  state_ = tell_teacher(algo_, state_, X, F);
}

RandomSearchStrategy::RandomSearchStrategy(Vec mu0, Vec sigma0)
    : mu_(std::move(mu0)), sigma_(std::move(sigma0)) {}

Mat RandomSearchStrategy::ask(Rng& rng, int n) {
  return ask_gaussian(make_es_state(mu_, sigma_), rng, n);
}

EvoTfStrategy::EvoTfStrategy(ModelParams params, Vec mu0, Vec sigma0,
                             int window, float eta_mu, float eta_sigma)
    : params_(std::move(params)),
      mu_(std::move(mu0)),
      sigma_(std::move(sigma0)),
      window_cap_(window),
      eta_mu_(eta_mu),
      eta_sigma_(eta_sigma),
      paths_(make_path_state(static_cast<int>(mu_.size()))) {
  if (window_cap_ < 1 || window_cap_ > params_.cfg.max_context)
    throw ConfigError("EvoTfStrategy: window outside [1, max_context]");
}

Mat EvoTfStrategy::ask(Rng& rng, int n) {
  return ask_gaussian(make_es_state(mu_, sigma_), rng, n);
}

void EvoTfStrategy::tell(const Mat& X, const Vec& F) {
  window_.push_back(featurize_generation(X, F, mu_, sigma_, paths_));
  if (static_cast<int>(window_.size()) > window_cap_) window_.pop_front();

  ad::NoGradGuard ng;
  std::vector<GenFeatures> ctx(window_.begin(), window_.end());
  ad::Tensor out = forward(params_, pack_trajectories({std::move(ctx)}));
  DistributionUpdate u = update_at(out, 0, out.dim(2) - 1);
  apply_update(mu_, sigma_, u, eta_mu_, eta_sigma_);
  for (float& s : sigma_) s = std::max(s, kSigmaFloor);
}

float RolloutResult::final_best() const {
  return best_so_far.empty() ? kInf : best_so_far.back();
}

float Trajectory::final_best() const {
  return best_curve.empty() ? kInf : best_curve.back();
}

RolloutResult run_strategy(AskTellOptimizer& strategy, const Objective& obj,
                           int gens, int pop, RngKey key, Trajectory* record) {
  if (gens < 1 || pop < 1)
    throw ConfigError("run_strategy: gens and pop must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  RolloutResult res;
  res.seed = key.lo;
  PathState rec_paths =
      make_path_state(static_cast<int>(strategy.mu().size()));

  float best = kInf;
  for (int g = 0; g < gens; ++g) {
    Rng ask_rng(split(split(key, 1), static_cast<std::uint64_t>(g)));
    Rng obj_rng(split(split(key, 2), static_cast<std::uint64_t>(g)));
    Mat X = strategy.ask(ask_rng, pop);
    Vec F = obj(X, obj_rng);
    if (!all_finite(F)) {
      res.failed = true;
      break;
    }
    if (record) {
      record->X.push_back(X);
      record->F.push_back(F);
      record->mu_pre.push_back(strategy.mu());
      record->sigma_pre.push_back(strategy.sigma());
      record->features.push_back(
          featurize_generation(X, F, strategy.mu(), strategy.sigma(),
                               rec_paths));
    }
    strategy.tell(X, F);
    if (record) {
      record->mu_post.push_back(strategy.mu());
      record->sigma_post.push_back(strategy.sigma());
    }
    const float gb = F[argmin(F)];
    best = std::min(best, gb);
    res.gen_best.push_back(gb);
    res.best_so_far.push_back(best);
    if (record) record->best_curve.push_back(best);
    ++res.generations_completed;
  }
  res.final_mu = strategy.mu();
  res.final_sigma = strategy.sigma();
  if (record) record->source = strategy.name();
  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return res;
}

void sample_init(Rng& rng, int dims, Vec& mu0, Vec& sigma0) {
  mu0.resize(static_cast<std::size_t>(dims));
  for (float& m : mu0) m = rng.uniform(-3.0f, 3.0f);
  const float ln_lo = std::log(0.25f), ln_hi = std::log(2.0f);
  const float s = std::exp(rng.uniform(ln_lo, ln_hi));
  sigma0.assign(static_cast<std::size_t>(dims), s);
}

GeneratedTrajectory generate_teacher_trajectory(TeacherAlgo algo,
                                                const Objective& obj, int dims,
                                                int pop, int gens,
                                                RngKey key) {
  Rng init_rng(split(key, 0));
  Vec mu0, sigma0;
  sample_init(init_rng, dims, mu0, sigma0);
  TeacherStrategy strategy(algo, std::move(mu0), std::move(sigma0));
  GeneratedTrajectory out;
  out.result = run_strategy(strategy, obj, gens, pop, key, &out.traj);
  out.ok = !out.result.failed;
  return out;
}

GeneratedTrajectory generate_model_trajectory(const ModelParams& params,
                                              const Objective& obj, int dims,
                                              int pop, int gens, int window,
                                              RngKey key) {
  Rng init_rng(split(key, 0));
  Vec mu0, sigma0;
  sample_init(init_rng, dims, mu0, sigma0);
  EvoTfStrategy strategy(params, std::move(mu0), std::move(sigma0), window);
  GeneratedTrajectory out;
  out.result = run_strategy(strategy, obj, gens, pop, key, &out.traj);
  out.ok = !out.result.failed;
  return out;
}

}  // namespace evotf
