#include "evotf/train_sread.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "evotf/checkpoint.hpp"
#include "evotf/distill.hpp"
#include "evotf/errors.hpp"
#include "evotf/metrics.hpp"
#include "evotf/optim.hpp"
#include "evotf/rollout.hpp"

namespace evotf {

void SreadConfig::validate() const {
  model.validate();
  if (offspring < 1 || iterations < 1 || buffer_cap < 1)
    throw ConfigError("sread: offspring/iterations/buffer_cap must be positive");
  if (sigma0 <= 0.0f || decay <= 0.0f || decay > 1.0f)
    throw ConfigError("sread: need sigma0 > 0 and decay in (0, 1]");
  if (dims < 1 || pop < 2 || gens < 1 || window < 1)
    throw ConfigError("sread: rollout sizes must be positive");
  if (gens > model.max_context)
    throw ConfigError("sread: gens exceeds the model's max context");
}

std::vector<float> perturb(const std::vector<float>& theta, float sigma_p,
                           Rng& rng) {
  std::vector<float> out(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i)
    out[i] = theta[i] + sigma_p * rng.normal();
  return out;
}

SreadResult train_sread(const SreadConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  SreadResult res{make_params(cfg.model, cfg.seed), 0, 0};
  std::vector<ad::Tensor> params = param_list(res.params);
  Adam adam(params, AdamConfig{cfg.lr});
  MetricsWriter metrics(out_dir + "/metrics.jsonl");
  ModelParams scratch = make_params(cfg.model, cfg.seed);

  const std::vector<BbobFn>& families = task_set_members(cfg.tasks);
  std::deque<Trajectory> buffer;
  const RngKey root = split(make_key(cfg.seed), 0x5EAD);

  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    const float sigma_p = static_cast<float>(
        static_cast<double>(cfg.sigma0) *
        std::pow(static_cast<double>(cfg.decay), iter));
    const RngKey ikey = split(root, static_cast<std::uint64_t>(iter));

    Rng task_rng(split(ikey, 0));
    std::vector<TaskSpec> tasks;
    for (BbobFn fn : families) {
      TaskSpec t{fn, cfg.dims, Vec(static_cast<std::size_t>(cfg.dims)), 0};
      for (float& o : t.offset) o = task_rng.uniform(-3.0f, 3.0f);
      tasks.push_back(std::move(t));
    }

    const std::vector<float> theta = flatten_params(res.params);
    std::vector<Trajectory> winners(tasks.size());
    Vec winner_best(tasks.size(),
                    std::numeric_limits<float>::infinity());
    std::vector<bool> found(tasks.size(), false);
    for (int i = 0; i < cfg.offspring; ++i) {
      Rng eps_rng(split(ikey, 1 + static_cast<std::uint64_t>(i)));
      load_flat_params(scratch, perturb(theta, sigma_p, eps_rng));
      for (std::size_t t = 0; t < tasks.size(); ++t) {
        // rollout key shared by all offspring: common random numbers
        const RngKey rkey = split(ikey, 1000 + static_cast<std::uint64_t>(t));
        GeneratedTrajectory gt = generate_model_trajectory(
            scratch, bbob_objective(tasks[t]), cfg.dims, cfg.pop, cfg.gens,
            cfg.window, rkey);
        if (!gt.ok) continue;
        const float fb = gt.traj.final_best();
        if (!found[t] || fb < winner_best[t]) {
          gt.traj.source_id = static_cast<std::uint64_t>(i);
          winners[t] = std::move(gt.traj);
          winner_best[t] = fb;
          found[t] = true;
        }
      }
    }

    MetricRecord rec{{"iter", static_cast<std::int64_t>(iter)},
                     {"sigma_p", static_cast<double>(sigma_p)}};
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      if (!found[t]) {
        ++res.skipped_tasks;
        continue;
      }
      buffer.push_back(std::move(winners[t]));
      if (static_cast<int>(buffer.size()) > cfg.buffer_cap)
        buffer.pop_front();
      rec.emplace_back(std::string("best_") + bbob_name(tasks[t].fn),
                       static_cast<double>(winner_best[t]));
    }
    rec.emplace_back("buffer", static_cast<std::int64_t>(buffer.size()));

    if (!buffer.empty()) {
      std::vector<Trajectory> batch(buffer.begin(), buffer.end());
      ad::Tensor out = forward(res.params, pack_batch(batch));
      ad::Tensor loss = distillation_loss(out, batch);
      const float loss_v = loss.scalar();
      if (!std::isfinite(loss_v)) {
        ++res.skipped_steps;
        rec.emplace_back("skipped", true);
      } else {
        ad::backward(loss);
        clip_global_norm(params, cfg.clip);
        adam.step();
        for (ad::Tensor& t : params) t.zero_grad();
        rec.emplace_back("loss", static_cast<double>(loss_v));
      }
    }
    metrics.write(rec);

    if (iter % cfg.checkpoint_every == 0)
      save_checkpoint(out_dir + "/ckpt_" + std::to_string(iter) + ".evotf",
                      res.params);
  }
  save_checkpoint(out_dir + "/final.evotf", res.params);
  return res;
}

}  // namespace evotf
