#include "evotf/train_meta.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evotf/checkpoint.hpp"
#include "evotf/errors.hpp"
#include "evotf/metrics.hpp"
#include "evotf/rollout.hpp"
#include "evotf/teachers.hpp"

namespace evotf {

namespace {

float median_of(Vec v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5f * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void MetaConfig::validate() const {
  if (init_checkpoint.empty()) model.validate();
  if (meta_pop < 2 || meta_gens < 1 || task_batch < 1)
    throw ConfigError("meta: meta_pop/meta_gens/task_batch must be positive");
  if (sigma_init <= 0.0f) throw ConfigError("meta: sigma_init must be > 0");
  if (dims < 1 || pop < 2 || gens < 1 || window < 1)
    throw ConfigError("meta: rollout sizes must be positive");
}

Vec znorm_meta_fitness(const Mat& scores) {
  const int n = scores.rows, t = scores.cols;
  if (n < 2) throw ConfigError("znorm_meta_fitness: needs >= 2 rows");
  Vec out(static_cast<std::size_t>(n), 0.0f);
  for (int j = 0; j < t; ++j) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += scores.at(i, j);
    mean /= n;
    double ss = 0.0;
    for (int i = 0; i < n; ++i) {
      const double e = scores.at(i, j) - mean;
      ss += e * e;
    }
    const double sd = std::sqrt(ss / n) + 1e-10;
    for (int i = 0; i < n; ++i)
      out[static_cast<std::size_t>(i)] +=
          static_cast<float>((scores.at(i, j) - mean) / sd);
  }
  for (float& v : out) v /= static_cast<float>(t);
  return out;
}

void apply_worst_finite_penalty(Mat& scores) {
  for (int j = 0; j < scores.cols; ++j) {
    float worst = -std::numeric_limits<float>::infinity();
    bool any = false;
    for (int i = 0; i < scores.rows; ++i) {
      const float v = scores.at(i, j);
      if (std::isfinite(v)) {
        worst = std::max(worst, v);
        any = true;
      }
    }
    const float fill = any ? worst : 0.0f;
    for (int i = 0; i < scores.rows; ++i)
      if (!std::isfinite(scores.at(i, j))) scores.at(i, j) = fill;
  }
}

MetaResult train_meta(const MetaConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  MetaResult res{cfg.init_checkpoint.empty()
                     ? make_params(cfg.model, cfg.seed)
                     : load_checkpoint(cfg.init_checkpoint)};
  MetricsWriter metrics(out_dir + "/metrics.jsonl");

  const std::vector<float> theta0 = flatten_params(res.params);
  EsState meta = make_es_state(
      theta0, Vec(theta0.size(), cfg.sigma_init));

  const RngKey root = split(make_key(cfg.seed), 0xA17A);

  // Frozen sphere battery: per-generation z-scores are relative to that
  // generation's candidates and raw scores depend on which tasks were drawn,
  // so neither is comparable across generations.  Every candidate is also
  // scored on the same sphere instances with the same rollout keys each
  // generation; the median of those scores tracks meta-progress.
  constexpr int kEvalTasks = 2;
  const RngKey eval_root = split(make_key(cfg.seed), 0xE7A1);
  std::vector<TaskSpec> eval_tasks;
  {
    Rng eval_rng(split(eval_root, 0));
    for (int t = 0; t < kEvalTasks; ++t) {
      TaskSpec spec{BbobFn::Sphere, cfg.dims, Vec(), cfg.seed};
      spec.offset.resize(static_cast<std::size_t>(cfg.dims));
      eval_rng.fill_uniform(spec.offset, -3.0f, 3.0f);
      eval_tasks.push_back(std::move(spec));
    }
  }
  for (int gen = 0; gen < cfg.meta_gens; ++gen) {
    const RngKey gkey = split(root, static_cast<std::uint64_t>(gen));
    Rng ask_rng(split(gkey, 0));
    const Mat cand = ask_gaussian(meta, ask_rng, cfg.meta_pop);

    Rng task_rng(split(gkey, 1));
    std::vector<TaskSpec> tasks;
    for (int t = 0; t < cfg.task_batch; ++t)
      tasks.push_back(sample_task(cfg.tasks, cfg.dims, task_rng));

    Mat scores(cfg.meta_pop, cfg.task_batch);
    Vec sphere_scores(static_cast<std::size_t>(cfg.meta_pop), 0.0f);
    std::vector<float> theta(theta0.size());
    for (int i = 0; i < cfg.meta_pop; ++i) {
      std::copy(cand.row(i), cand.row(i) + cand.cols, theta.begin());
      load_flat_params(res.params, theta);
      for (int t = 0; t < cfg.task_batch; ++t) {
        // identical key for every candidate: common random numbers
        const RngKey rkey = split(gkey, 2 + static_cast<std::uint64_t>(t));
        Rng init_rng(split(rkey, 0));
        Vec mu0, sigma0;
        sample_init(init_rng, cfg.dims, mu0, sigma0);
        EvoTfStrategy strategy(res.params, std::move(mu0), std::move(sigma0),
                               cfg.window);
        RolloutResult r = run_strategy(strategy, bbob_objective(tasks[
                                           static_cast<std::size_t>(t)]),
                                       cfg.gens, cfg.pop, rkey);
        scores.at(i, t) = r.failed
                              ? std::numeric_limits<float>::quiet_NaN()
                              : r.final_best();
      }
      double sphere_sum = 0.0;
      for (int t = 0; t < kEvalTasks; ++t) {
        const RngKey ekey = split(eval_root, 1 + static_cast<std::uint64_t>(t));
        Rng init_rng(split(ekey, 0));
        Vec mu0, sigma0;
        sample_init(init_rng, cfg.dims, mu0, sigma0);
        EvoTfStrategy strategy(res.params, std::move(mu0), std::move(sigma0),
                               cfg.window);
        RolloutResult r =
            run_strategy(strategy, bbob_objective(eval_tasks[
                             static_cast<std::size_t>(t)]),
                         cfg.gens, cfg.pop, ekey);
        sphere_sum += r.final_best();  // +inf when the rollout failed
      }
      sphere_scores[static_cast<std::size_t>(i)] =
          static_cast<float>(sphere_sum / kEvalTasks);
    }
    apply_worst_finite_penalty(scores);
    const Vec fitness = znorm_meta_fitness(scores);
    meta = tell_sepcmaes(meta, cand, fitness);
    for (float s : meta.sigma)
      if (!(s > 0.0f) || !std::isfinite(s))
        throw NumericError("meta: outer ES variance collapsed");

    Vec raw_means;
    for (int i = 0; i < cfg.meta_pop; ++i)
      raw_means.push_back(
          vec_mean({scores.row(i), static_cast<std::size_t>(scores.cols)}));
    const float best =
        *std::min_element(fitness.begin(), fitness.end());
    metrics.write({{"meta_gen", static_cast<std::int64_t>(gen)},
                   {"best_fitness", static_cast<double>(best)},
                   {"median_fitness", static_cast<double>(median_of(fitness))},
                   {"median_raw", static_cast<double>(median_of(raw_means))},
                   {"median_sphere",
                    static_cast<double>(median_of(sphere_scores))},
                   {"sigma_mean", static_cast<double>(vec_mean(meta.sigma))}});

    if ((gen + 1) % cfg.checkpoint_every == 0) {
      load_flat_params(res.params, meta.mu);
      save_checkpoint(out_dir + "/ckpt_" + std::to_string(gen + 1) + ".evotf",
                      res.params);
    }
  }
  load_flat_params(res.params, meta.mu);
  save_checkpoint(out_dir + "/final.evotf", res.params);
  return res;
}

}  // namespace evotf
