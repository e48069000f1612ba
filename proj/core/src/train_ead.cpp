#include "evotf/train_ead.hpp"

#include <algorithm>
#include <cmath>

#include "evotf/checkpoint.hpp"
#include "evotf/distill.hpp"
#include "evotf/errors.hpp"
#include "evotf/metrics.hpp"
#include "evotf/optim.hpp"
#include "evotf/rollout.hpp"

namespace evotf {

namespace {

// Median final best-so-far of the model on a task over a few seeded runs.
double eval_model(const ModelParams& params, const Objective& obj, int dims,
                  int pop, int gens, int window, int seeds, RngKey key) {
  Vec finals;
  for (int s = 0; s < seeds; ++s) {
    GeneratedTrajectory gt = generate_model_trajectory(
        params, obj, dims, pop, gens, window,
        split(key, static_cast<std::uint64_t>(s)));
    finals.push_back(gt.result.final_best());
  }
  std::sort(finals.begin(), finals.end());
  const std::size_t n = finals.size();
  return n % 2 == 1 ? finals[n / 2]
                    : 0.5 * (static_cast<double>(finals[n / 2 - 1]) +
                             finals[n / 2]);
}

}  // namespace

void EadConfig::validate() const {
  model.validate();
  if (dims < 1 || pop < 2 || gens < 1 || batch < 1 || steps < 1)
    throw ConfigError("ead: dims/pop/gens/batch/steps must be positive");
  if (gens > model.max_context)
    throw ConfigError("ead: gens exceeds the model's max context");
  if (lr <= 0.0f || clip <= 0.0f)
    throw ConfigError("ead: lr and clip must be positive");
  if (eval_every < 1 || checkpoint_every < 1 || eval_seeds < 1)
    throw ConfigError("ead: cadences must be positive");
}

EadResult train_ead(const EadConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  EadResult res{make_params(cfg.model, cfg.seed), 0, 0};
  std::vector<ad::Tensor> params = param_list(res.params);
  Adam adam(params, AdamConfig{cfg.lr});
  MetricsWriter metrics(out_dir + "/metrics.jsonl");

  const RngKey root = make_key(cfg.seed);
  const RngKey traj_root = split(root, 1);
  const RngKey eval_root = split(root, 2);

  for (int step = 0; step < cfg.steps; ++step) {
    const RngKey step_key = split(traj_root, static_cast<std::uint64_t>(step));
    std::vector<Trajectory> batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch));
    for (int b = 0; b < cfg.batch; ++b) {
      const RngKey bkey = split(step_key, static_cast<std::uint64_t>(b));
      for (int attempt = 0;; ++attempt) {
        if (attempt >= 50)
          throw NumericError("ead: could not sample a finite trajectory");
        Rng task_rng(split(bkey, 3 + 2 * static_cast<std::uint64_t>(attempt)));
        const TaskSpec task = sample_task(cfg.tasks, cfg.dims, task_rng);
        GeneratedTrajectory gt = generate_teacher_trajectory(
            cfg.teacher, bbob_objective(task), cfg.dims, cfg.pop, cfg.gens,
            attempt == 0
                ? bkey
                : split(bkey, 1000 + static_cast<std::uint64_t>(attempt)));
        if (gt.ok) {
          batch.push_back(std::move(gt.traj));
          break;
        }
        ++res.resampled_trajectories;
      }
    }

    const float lr_t =
        cosine_warmup_lr(step, cfg.steps, cfg.lr, cfg.lr_floor);
    ad::Tensor out = forward(res.params, pack_batch(batch));
    ad::Tensor loss = distillation_loss(out, batch);
    const float loss_v = loss.scalar();

    MetricRecord rec{{"step", static_cast<std::int64_t>(step)}};
    if (!std::isfinite(loss_v)) {
      ++res.skipped_steps;
      rec.emplace_back("skipped", true);
    } else {
      ad::backward(loss);
      const float gnorm = clip_global_norm(params, cfg.clip);
      adam.step(lr_t);
      for (ad::Tensor& t : params) t.zero_grad();
      rec.emplace_back("loss", static_cast<double>(loss_v));
      rec.emplace_back("lr", static_cast<double>(lr_t));
      rec.emplace_back("grad_norm", static_cast<double>(gnorm));
    }

    const bool at_cadence = (step + 1) % cfg.eval_every == 0;
    if (at_cadence || step + 1 == cfg.steps) {
      const RngKey ek = split(eval_root, static_cast<std::uint64_t>(step));
      const TaskSpec sphere{BbobFn::Sphere, cfg.dims,
                            Vec(static_cast<std::size_t>(cfg.dims), 0.0f), 0};
      rec.emplace_back("eval_sphere",
                       eval_model(res.params, bbob_objective(sphere), cfg.dims,
                                  cfg.pop, cfg.gens, 5, cfg.eval_seeds,
                                  split(ek, 1)));
      const ControlTask cartpole = make_cartpole(7);
      rec.emplace_back(
          "eval_cartpole",
          eval_model(res.params, control_objective(cartpole),
                     policy_param_count(cartpole), cfg.pop, cfg.gens, 5,
                     cfg.eval_seeds, split(ek, 2)));
    }
    metrics.write(rec);

    if ((step + 1) % cfg.checkpoint_every == 0)
      save_checkpoint(out_dir + "/ckpt_" + std::to_string(step + 1) + ".evotf",
                      res.params);
  }
  save_checkpoint(out_dir + "/final.evotf", res.params);
  return res;
}

}  // namespace evotf
