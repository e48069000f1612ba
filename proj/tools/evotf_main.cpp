#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "evotf/checkpoint.hpp"
#include "evotf/errors.hpp"
#include "evotf/metrics.hpp"
#include "evotf/props.hpp"
#include "evotf/rollout.hpp"
#include "evotf/train_ead.hpp"
#include "evotf/train_meta.hpp"
#include "evotf/train_sread.hpp"
#include "json.hpp"

namespace {

using namespace evotf;
using ordered_json = nlohmann::ordered_json;

// ---- shared plumbing ------------------------------------------------------

std::string ensure_out_dir(const std::string& out) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory '" + out + "'");
  return out;
}

// Data sink: a file inside --out, or stdout when no directory was given.
class Sink {
 public:
  Sink(const std::string& out_dir, const std::string& filename) {
    if (!out_dir.empty()) {
      const std::string path = ensure_out_dir(out_dir) + "/" + filename;
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw IoError("cannot open '" + path + "' for writing");
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

BbobFn bbob_from_name(const std::string& name) {
  for (BbobFn fn :
       {BbobFn::Sphere, BbobFn::Rosenbrock, BbobFn::Discus, BbobFn::Rastrigin,
        BbobFn::Schwefel, BbobFn::BuecheRastrigin, BbobFn::AttractiveSector,
        BbobFn::Weierstrass, BbobFn::SchaffersF7, BbobFn::GriewankRosen})
    if (name == bbob_name(fn)) return fn;
  throw ConfigError("unknown task '" + name + "'");
}

// A named objective plus the search dimensionality it implies.
struct ResolvedTask {
  std::string name;
  int dims{0};
  Objective objective;
};

ResolvedTask resolve_task(const std::string& name, int dims, float offset,
                          std::uint64_t task_seed) {
  ResolvedTask t;
  t.name = name;
  if (name == "cartpole" || name == "pendulum") {
    const ControlTask ct =
        name == "cartpole" ? make_cartpole(task_seed) : make_pendulum(task_seed);
    t.dims = policy_param_count(ct);
    t.objective = control_objective(ct);
    return t;
  }
  TaskSpec spec{bbob_from_name(name), dims,
                Vec(static_cast<std::size_t>(dims), offset), task_seed};
  t.dims = dims;
  t.objective = bbob_objective(spec);
  return t;
}

// "snes" | "sepcmaes" | "openes" | "hillclimb" | "random" | "evotf:<ckpt>"
StrategyFactory resolve_strategy(const std::string& spec, int window,
                                 float eta_mu, float eta_sigma) {
  if (spec == "random")
    return [](Vec mu0, Vec sigma0) -> std::unique_ptr<AskTellOptimizer> {
      return std::make_unique<RandomSearchStrategy>(std::move(mu0),
                                                    std::move(sigma0));
    };
  if (spec.rfind("evotf:", 0) == 0)
    return model_factory(load_checkpoint(spec.substr(6)), window, eta_mu,
                         eta_sigma);
  return teacher_factory(teacher_from_name(spec));
}

std::string json_num(double v) { return ordered_json(v).dump(); }

void add_model_flags(CLI::App* cmd, ModelConfig& m) {
  auto* g = cmd->add_option_group("model", "architecture overrides");
  g->add_option("--num_blocks", m.num_blocks);
  g->add_option("--num_heads", m.num_heads);
  g->add_option("--num_latents", m.num_latents);
  g->add_option("--latent_dim", m.latent_dim);
  g->add_option("--embed_dim", m.embed_dim);
  g->add_option("--max_context", m.max_context);
  g->add_flag("--use_fitness,!--no_fitness", m.use_fitness);
  g->add_flag("--use_distribution,!--no_distribution", m.use_distribution);
  g->add_flag("--use_cross_dim,!--no_cross_dim", m.use_cross_dim);
}

// ---- subcommand option bags ----------------------------------------------

struct TrainEadArgs {
  EadConfig cfg;
  std::string teacher{"snes"}, tasks{"medium"}, out;
};

struct TrainMetaArgs {
  MetaConfig cfg;
  std::string init{"random"}, tasks{"medium"}, out;
};

struct TrainSreadArgs {
  SreadConfig cfg;
  std::string tasks{"medium"}, out;
};

struct RunArgs {
  std::string strategy{"snes"}, task{"sphere"}, out;
  int dims{5}, pop{16}, gens{32}, window{5};
  float offset{0.0f}, eta_mu{1.0f}, eta_sigma{1.0f};
  std::uint64_t seed{0}, task_seed{0};
};

struct PropsArgs {
  std::string strategy, ckpt, out;
  int trials{64}, window{5};
  float eta_mu{1.0f}, eta_sigma{1.0f};
  std::uint64_t seed{0};
};

struct BenchArgs {
  std::vector<std::string> strategies{"snes"};
  std::vector<std::string> tasks{"sphere"};
  std::string out;
  int seeds{10}, dims{5}, pop{16}, gens{32}, window{5};
  std::uint64_t seed{0};
  float eta_mu{1.0f}, eta_sigma{1.0f};
};

struct AttnArgs {
  std::string ckpt, task{"sphere"}, out;
  int dims{5}, pop{16}, gens{5}, gen{-1}, dim{0}, window{0};
  float offset{0.0f};
  std::uint64_t seed{0}, task_seed{0};
};

// ---- subcommands ----------------------------------------------------------

int cmd_train_ead(const TrainEadArgs& a) {
  EadConfig cfg = a.cfg;
  cfg.teacher = teacher_from_name(a.teacher);
  cfg.tasks = task_set_from_name(a.tasks);
  const EadResult res = train_ead(cfg, ensure_out_dir(a.out));
  std::cerr << "train-ead done: " << cfg.steps << " steps, "
            << res.skipped_steps << " skipped, "
            << res.resampled_trajectories << " trajectories resampled\n";
  return 0;
}

int cmd_train_meta(const TrainMetaArgs& a) {
  MetaConfig cfg = a.cfg;
  cfg.tasks = task_set_from_name(a.tasks);
  cfg.init_checkpoint = a.init == "random" ? std::string() : a.init;
  train_meta(cfg, ensure_out_dir(a.out));
  std::cerr << "train-meta done: " << cfg.meta_gens << " meta-generations\n";
  return 0;
}

int cmd_train_sread(const TrainSreadArgs& a) {
  SreadConfig cfg = a.cfg;
  cfg.tasks = task_set_from_name(a.tasks);
  const SreadResult res = train_sread(cfg, ensure_out_dir(a.out));
  std::cerr << "train-sread done: " << cfg.iterations << " iterations, "
            << res.skipped_steps << " skipped steps, " << res.skipped_tasks
            << " skipped tasks\n";
  return 0;
}

int cmd_run(const RunArgs& a) {
  const ResolvedTask task =
      resolve_task(a.task, a.dims, a.offset, a.task_seed);
  const StrategyFactory make =
      resolve_strategy(a.strategy, a.window, a.eta_mu, a.eta_sigma);

  const RngKey key = make_key(a.seed);
  Rng init_rng(split(key, 0));
  Vec mu0, sigma0;
  sample_init(init_rng, task.dims, mu0, sigma0);
  auto strategy = make(mu0, sigma0);
  RolloutResult res =
      run_strategy(*strategy, task.objective, a.gens, a.pop, key);

  Sink sink(a.out, "run.jsonl");
  for (int g = 0; g < res.generations_completed; ++g)
    sink.stream() << metric_record_json(
                         {{"generation", static_cast<std::int64_t>(g)},
                          {"gen_best", static_cast<double>(res.gen_best[
                               static_cast<std::size_t>(g)])},
                          {"best_so_far", static_cast<double>(res.best_so_far[
                               static_cast<std::size_t>(g)])}})
                  << '\n';
  ordered_json summary{{"strategy", strategy->name()},
                       {"task", task.name},
                       {"seed", a.seed},
                       {"generations", res.generations_completed},
                       {"failed", res.failed},
                       {"final_best", res.final_best()},
                       {"final_mu", res.final_mu},
                       {"final_sigma", res.final_sigma}};
  sink.stream() << summary.dump() << '\n';
  std::cerr << "run: " << strategy->name() << " on " << task.name << " took "
            << res.wall_seconds << "s\n";
  return 0;
}

int cmd_props(const PropsArgs& a) {
  if (a.strategy.empty() == a.ckpt.empty())
    throw ConfigError("props: pass exactly one of --strategy or --ckpt");
  const StrategyFactory make =
      a.ckpt.empty()
          ? resolve_strategy(a.strategy, a.window, a.eta_mu, a.eta_sigma)
          : model_factory(load_checkpoint(a.ckpt), a.window, a.eta_mu,
                          a.eta_sigma);

  const UnbiasednessReport u = check_unbiasedness(make, a.trials, 3, 5, 8, a.seed);
  const TranslationReport t = check_translation_invariance(
      make, {-2.0f, 0.0f, 2.0f}, a.trials / 4 > 0 ? a.trials / 4 : 1, 3, 5, 32,
      a.seed);
  const ScaleReport s =
      check_scale_adaptation(make, a.trials / 4 > 0 ? a.trials / 4 : 1, 3, 5,
                             32, a.seed);

  Sink sink(a.out, "props.jsonl");
  sink.stream() << ordered_json{{"check", "unbiasedness"},
                                {"pass", u.pass},
                                {"trials", u.trials},
                                {"mean_drift", u.mean_drift},
                                {"stderr", u.stderr_per_coord}}
                       .dump()
                << '\n';
  sink.stream() << ordered_json{{"check", "translation_invariance"},
                                {"pass", t.pass},
                                {"offsets", t.offsets},
                                {"median_final", t.median_final},
                                {"median_dist", t.median_dist},
                                {"ratio", t.ratio}}
                       .dump()
                << '\n';
  sink.stream() << ordered_json{{"check", "scale_adaptation"},
                                {"pass", s.pass},
                                {"median_first", s.median_first},
                                {"median_last", s.median_last}}
                       .dump()
                << '\n';
  const bool all = u.pass && t.pass && s.pass;
  sink.stream() << ordered_json{{"check", "all"}, {"pass", all}}.dump() << '\n';
  std::cerr << "props: " << (all ? "PASS" : "FAIL") << '\n';
  return 0;
}

int cmd_bench(const BenchArgs& a) {
  Sink sink(a.out, "bench.csv");
  sink.stream() << "strategy,task,seed,generation,best_so_far\n";
  const RngKey root = make_key(a.seed);
  int failures = 0;
  for (const std::string& sname : a.strategies) {
    const StrategyFactory make =
        resolve_strategy(sname, a.window, a.eta_mu, a.eta_sigma);
    for (std::size_t ti = 0; ti < a.tasks.size(); ++ti) {
      for (int s = 0; s < a.seeds; ++s) {
        // one key per (task, seed): shared by all strategies for common
        // random numbers, independent of the strategy list
        const RngKey key = split(split(root, static_cast<std::uint64_t>(ti)),
                                 static_cast<std::uint64_t>(s));
        Rng task_rng(split(key, 3));
        const float offset = task_rng.uniform(-3.0f, 3.0f);
        const ResolvedTask task = resolve_task(a.tasks[ti], a.dims, offset,
                                               static_cast<std::uint64_t>(s));
        Rng init_rng(split(key, 0));
        Vec mu0, sigma0;
        sample_init(init_rng, task.dims, mu0, sigma0);
        auto strategy = make(mu0, sigma0);
        RolloutResult res =
            run_strategy(*strategy, task.objective, a.gens, a.pop, key);
        if (res.failed) ++failures;
        for (int g = 0; g < res.generations_completed; ++g)
          sink.stream() << sname << ',' << task.name << ',' << s << ',' << g
                        << ','
                        << json_num(res.best_so_far[static_cast<std::size_t>(g)])
                        << '\n';
      }
    }
  }
  std::cerr << "bench: " << a.strategies.size() << " strategies x "
            << a.tasks.size() << " tasks x " << a.seeds << " seeds, "
            << failures << " failed rollouts\n";
  return 0;
}

void write_matrix(std::ostream& os, const std::string& name, const Mat& m) {
  os << name << ' ' << m.rows << ' ' << m.cols << '\n';
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j)
      os << (j ? " " : "") << json_num(m.at(i, j));
    os << '\n';
  }
}

int cmd_attn(const AttnArgs& a) {
  ModelParams params = load_checkpoint(a.ckpt);
  if (a.gens > params.cfg.max_context)
    throw ConfigError("attn: --gens exceeds the model's max context");
  const ResolvedTask task =
      resolve_task(a.task, a.dims, a.offset, a.task_seed);
  const int window = a.window > 0 ? a.window : a.gens;
  GeneratedTrajectory gt =
      generate_model_trajectory(params, task.objective, task.dims, a.pop,
                                a.gens, window, make_key(a.seed));
  if (gt.traj.generations() == 0)
    throw NumericError("attn: rollout produced no finite generations");
  const int gen = a.gen < 0 ? gt.traj.generations() - 1 : a.gen;
  if (gen >= gt.traj.generations())
    throw ConfigError("attn: --gen beyond the recorded rollout");
  AttentionMaps maps = attention_maps(params, gt.traj.features, gen, a.dim);

  Sink sink(a.out, "attn.txt");
  std::ostream& os = sink.stream();
  os << "gen " << gen << " dim " << a.dim << " task " << task.name << '\n';
  for (std::size_t d = 0; d < maps.solution.size(); ++d)
    write_matrix(os, "solution.d" + std::to_string(d), maps.solution[d]);
  if (maps.fitness.rows > 0) write_matrix(os, "fitness", maps.fitness);
  for (std::size_t h = 0; h < maps.distribution.size(); ++h)
    write_matrix(os, "distribution.h" + std::to_string(h),
                 maps.distribution[h]);
  if (maps.cross_dim.rows > 0) write_matrix(os, "cross_dim", maps.cross_dim);
  for (std::size_t i = 0; i < maps.temporal.size(); ++i)
    write_matrix(os, "temporal." + std::to_string(i), maps.temporal[i]);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evolution transformer: training, rollouts, and analysis"};
  app.require_subcommand(1);

  TrainEadArgs ead;
  auto* c_ead = app.add_subcommand(
      "train-ead", "distill a teacher algorithm into the model");
  c_ead->set_config("--config");
  c_ead->add_option("--teacher", ead.teacher,
                    "snes|sepcmaes|openes|hillclimb");
  c_ead->add_option("--tasks", ead.tasks, "small|medium|large");
  c_ead->add_option("--dims", ead.cfg.dims);
  c_ead->add_option("--pop", ead.cfg.pop);
  c_ead->add_option("--gens", ead.cfg.gens);
  c_ead->add_option("--batch", ead.cfg.batch);
  c_ead->add_option("--steps", ead.cfg.steps);
  c_ead->add_option("--lr", ead.cfg.lr);
  c_ead->add_option("--lr_floor", ead.cfg.lr_floor);
  c_ead->add_option("--clip", ead.cfg.clip);
  c_ead->add_option("--eval_every", ead.cfg.eval_every);
  c_ead->add_option("--checkpoint_every", ead.cfg.checkpoint_every);
  c_ead->add_option("--eval_seeds", ead.cfg.eval_seeds);
  c_ead->add_option("--seed", ead.cfg.seed);
  c_ead->add_option("--out", ead.out)->required();
  add_model_flags(c_ead, ead.cfg.model);

  TrainMetaArgs meta;
  auto* c_meta = app.add_subcommand(
      "train-meta", "evolve the model weights with an outer ES");
  c_meta->set_config("--config");
  c_meta->add_option("--init", meta.init, "random | checkpoint path");
  c_meta->add_option("--pop", meta.cfg.meta_pop, "outer population");
  c_meta->add_option("--gens", meta.cfg.meta_gens, "outer generations");
  c_meta->add_option("--tasks-per-gen", meta.cfg.task_batch);
  c_meta->add_option("--sigma_init", meta.cfg.sigma_init);
  c_meta->add_option("--tasks", meta.tasks, "small|medium|large");
  c_meta->add_option("--dims", meta.cfg.dims);
  c_meta->add_option("--rollout_pop", meta.cfg.pop);
  c_meta->add_option("--rollout_gens", meta.cfg.gens);
  c_meta->add_option("--window", meta.cfg.window);
  c_meta->add_option("--checkpoint_every", meta.cfg.checkpoint_every);
  c_meta->add_option("--seed", meta.cfg.seed);
  c_meta->add_option("--out", meta.out)->required();
  add_model_flags(c_meta, meta.cfg.model);

  TrainSreadArgs sread;
  auto* c_sread = app.add_subcommand(
      "train-sread", "self-referential distillation without a teacher");
  c_sread->set_config("--config");
  c_sread->add_option("--offspring", sread.cfg.offspring);
  c_sread->add_option("--sigma0", sread.cfg.sigma0);
  c_sread->add_option("--decay", sread.cfg.decay);
  c_sread->add_option("--iters", sread.cfg.iterations);
  c_sread->add_option("--buffer_cap", sread.cfg.buffer_cap);
  c_sread->add_option("--lr", sread.cfg.lr);
  c_sread->add_option("--clip", sread.cfg.clip);
  c_sread->add_option("--tasks", sread.tasks, "small|medium|large");
  c_sread->add_option("--dims", sread.cfg.dims);
  c_sread->add_option("--pop", sread.cfg.pop);
  c_sread->add_option("--gens", sread.cfg.gens);
  c_sread->add_option("--window", sread.cfg.window);
  c_sread->add_option("--checkpoint_every", sread.cfg.checkpoint_every);
  c_sread->add_option("--seed", sread.cfg.seed);
  c_sread->add_option("--out", sread.out)->required();
  add_model_flags(c_sread, sread.cfg.model);

  RunArgs run;
  auto* c_run = app.add_subcommand("run", "one ask/tell rollout");
  c_run->set_config("--config");
  c_run->add_option("--strategy", run.strategy,
                    "teacher name, 'random', or 'evotf:<ckpt>'");
  c_run->add_option("--task", run.task, "bbob name, cartpole, or pendulum");
  c_run->add_option("--dims", run.dims);
  c_run->add_option("--pop", run.pop);
  c_run->add_option("--gens", run.gens);
  c_run->add_option("--window", run.window);
  c_run->add_option("--offset", run.offset, "bbob optimum per coordinate");
  c_run->add_option("--eta_mu", run.eta_mu);
  c_run->add_option("--eta_sigma", run.eta_sigma);
  c_run->add_option("--task_seed", run.task_seed);
  c_run->add_option("--seed", run.seed);
  c_run->add_option("--out", run.out, "directory for run.jsonl (default stdout)");

  PropsArgs props;
  auto* c_props = app.add_subcommand(
      "props", "unbiasedness, translation, and scale-adaptation checks");
  c_props->set_config("--config");
  c_props->add_option("--strategy", props.strategy,
                      "teacher name or 'random'");
  c_props->add_option("--ckpt", props.ckpt, "model checkpoint to check");
  c_props->add_option("--trials", props.trials);
  c_props->add_option("--window", props.window);
  c_props->add_option("--eta_mu", props.eta_mu);
  c_props->add_option("--eta_sigma", props.eta_sigma);
  c_props->add_option("--seed", props.seed);
  c_props->add_option("--out", props.out,
                      "directory for props.jsonl (default stdout)");

  BenchArgs bench;
  auto* c_bench = app.add_subcommand(
      "bench", "strategy x task x seed fitness curves as CSV");
  c_bench->set_config("--config");
  c_bench->add_option("--strategies", bench.strategies)->delimiter(',');
  c_bench->add_option("--tasks", bench.tasks)->delimiter(',');
  c_bench->add_option("--seeds", bench.seeds, "number of seeded repetitions");
  c_bench->add_option("--dims", bench.dims);
  c_bench->add_option("--pop", bench.pop);
  c_bench->add_option("--gens", bench.gens);
  c_bench->add_option("--window", bench.window);
  c_bench->add_option("--eta_mu", bench.eta_mu);
  c_bench->add_option("--eta_sigma", bench.eta_sigma);
  c_bench->add_option("--seed", bench.seed);
  c_bench->add_option("--out", bench.out,
                      "directory for bench.csv (default stdout)");

  AttnArgs attn;
  auto* c_attn = app.add_subcommand(
      "attn", "export attention maps from a model rollout");
  c_attn->set_config("--config");
  c_attn->add_option("--ckpt", attn.ckpt)->required();
  c_attn->add_option("--task", attn.task, "bbob name, cartpole, or pendulum");
  c_attn->add_option("--dims", attn.dims);
  c_attn->add_option("--pop", attn.pop);
  c_attn->add_option("--gens", attn.gens);
  c_attn->add_option("--gen", attn.gen, "generation to export (default last)");
  c_attn->add_option("--dim", attn.dim, "dimension for temporal maps");
  c_attn->add_option("--window", attn.window, "0: full context");
  c_attn->add_option("--offset", attn.offset);
  c_attn->add_option("--task_seed", attn.task_seed);
  c_attn->add_option("--seed", attn.seed);
  c_attn->add_option("--out", attn.out,
                     "directory for attn.txt (default stdout)");

  try {
    app.parse(argc, argv);
    if (c_ead->parsed()) return cmd_train_ead(ead);
    if (c_meta->parsed()) return cmd_train_meta(meta);
    if (c_sread->parsed()) return cmd_train_sread(sread);
    if (c_run->parsed()) return cmd_run(run);
    if (c_props->parsed()) return cmd_props(props);
    if (c_bench->parsed()) return cmd_bench(bench);
    if (c_attn->parsed()) return cmd_attn(attn);
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
