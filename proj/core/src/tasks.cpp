#include "evotf/tasks.hpp"

#include <cmath>
#include <numbers>

#include "evotf/errors.hpp"

namespace evotf {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSchwefelConst = 418.9828872724339;

double sphere(std::span<const float> z) {
  double s = 0.0;
  for (float v : z) s += static_cast<double>(v) * v;
  return s;
}

double rosenbrock(std::span<const float> z) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < z.size(); ++i) {
    const double a = static_cast<double>(z[i + 1]) - static_cast<double>(z[i]) * z[i];
    const double b = 1.0 - z[i];
    s += 100.0 * a * a + b * b;
  }
  return s;
}

double discus(std::span<const float> z) {
  double s = 1e6 * static_cast<double>(z[0]) * z[0];
  for (std::size_t i = 1; i < z.size(); ++i) s += static_cast<double>(z[i]) * z[i];
  return s;
}

double rastrigin(std::span<const float> z) {
  double cs = 0.0, sq = 0.0;
  for (float v : z) {
    cs += std::cos(2.0 * kPi * v);
    sq += static_cast<double>(v) * v;
  }
  return 10.0 * (static_cast<double>(z.size()) - cs) + sq;
}

double schwefel(std::span<const float> z) {
  double s = 0.0;
  for (float v : z) s += static_cast<double>(v) * std::sin(std::sqrt(std::abs(static_cast<double>(v))));
  return kSchwefelConst * static_cast<double>(z.size()) - s;
}

double bueche_rastrigin(std::span<const float> z) {
  const std::size_t d = z.size();
  double cs = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double s = d > 1 ? std::pow(10.0, 0.5 * static_cast<double>(i) /
                                          static_cast<double>(d - 1))
                     : 1.0;
    if (i % 2 == 0 && z[i] > 0.0f) s *= 10.0;  // odd coordinates, 1-based
    const double t = s * z[i];
    cs += std::cos(2.0 * kPi * t);
    sq += t * t;
  }
  return 10.0 * (static_cast<double>(d) - cs) + sq;
}

double attractive_sector(std::span<const float> z) {
  double s = 0.0;
  for (float v : z) {
    const double w = (v > 0.0f ? 100.0 : 1.0) * v;
    s += w * w;
  }
  return s;
}

double weierstrass(std::span<const float> z) {
  constexpr double a = 0.5, b = 3.0;
  constexpr int kmax = 11;
  double f0 = 0.0;
  for (int k = 0; k <= kmax; ++k) {
    f0 += std::pow(a, k) * std::cos(2.0 * kPi * std::pow(b, k) * 0.5);
  }
  double s = 0.0;
  for (float v : z) {
    for (int k = 0; k <= kmax; ++k) {
      s += std::pow(a, k) *
           std::cos(2.0 * kPi * std::pow(b, k) * (static_cast<double>(v) + 0.5));
    }
  }
  return s - static_cast<double>(z.size()) * f0;
}

double schaffers_f7(std::span<const float> z) {
  const std::size_t d = z.size();
  if (d < 2) return sphere(z);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < d; ++i) {
    const double s = std::sqrt(static_cast<double>(z[i]) * z[i] +
                               static_cast<double>(z[i + 1]) * z[i + 1]);
    const double rs = std::sqrt(s);
    const double sn = std::sin(50.0 * std::pow(s, 0.2));
    acc += rs + rs * sn * sn;
  }
  acc /= static_cast<double>(d - 1);
  return acc * acc;
}

double griewank_rosen(std::span<const float> z) {
  const std::size_t d = z.size();
  if (d < 2) return sphere(z);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < d; ++i) {
    // classic Rosenbrock pair term on z (already includes the +1 shift)
    const double a = static_cast<double>(z[i + 1]) - static_cast<double>(z[i]) * z[i];
    const double b = 1.0 - z[i];
    const double r = 100.0 * a * a + b * b;
    acc += r / 4000.0 - std::cos(r);
  }
  return 10.0 / static_cast<double>(d - 1) * acc + 10.0;
}

}  // namespace

const char* bbob_name(BbobFn fn) {
  switch (fn) {
    case BbobFn::Sphere: return "sphere";
    case BbobFn::Rosenbrock: return "rosenbrock";
    case BbobFn::Discus: return "discus";
    case BbobFn::Rastrigin: return "rastrigin";
    case BbobFn::Schwefel: return "schwefel";
    case BbobFn::BuecheRastrigin: return "bueche_rastrigin";
    case BbobFn::AttractiveSector: return "attractive_sector";
    case BbobFn::Weierstrass: return "weierstrass";
    case BbobFn::SchaffersF7: return "schaffers_f7";
    case BbobFn::GriewankRosen: return "griewank_rosen";
  }
  return "?";
}

TaskSetName task_set_from_name(const std::string& name) {
  if (name == "small") return TaskSetName::Small;
  if (name == "medium") return TaskSetName::Medium;
  if (name == "large") return TaskSetName::Large;
  throw ConfigError("unknown task set '" + name + "' (small|medium|large)");
}

const char* task_set_name(TaskSetName set) {
  switch (set) {
    case TaskSetName::Small: return "small";
    case TaskSetName::Medium: return "medium";
    case TaskSetName::Large: return "large";
  }
  return "?";
}

const std::vector<BbobFn>& task_set_members(TaskSetName set) {
  static const std::vector<BbobFn> small{BbobFn::Sphere};
  static const std::vector<BbobFn> medium{BbobFn::Sphere, BbobFn::Rosenbrock,
                                          BbobFn::Discus, BbobFn::Rastrigin,
                                          BbobFn::Schwefel};
  static const std::vector<BbobFn> large{
      BbobFn::Sphere,          BbobFn::Rosenbrock,  BbobFn::Discus,
      BbobFn::Rastrigin,       BbobFn::Schwefel,    BbobFn::BuecheRastrigin,
      BbobFn::AttractiveSector, BbobFn::Weierstrass, BbobFn::SchaffersF7,
      BbobFn::GriewankRosen};
  switch (set) {
    case TaskSetName::Small: return small;
    case TaskSetName::Medium: return medium;
    case TaskSetName::Large: return large;
  }
  return small;
}

float eval_bbob(const TaskSpec& spec, std::span<const float> x) {
  if (static_cast<int>(x.size()) != spec.dims ||
      spec.offset.size() != x.size()) {
    throw std::invalid_argument("eval_bbob: dimension mismatch");
  }
  // z computed in float so translation identity is exact
  std::vector<float> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i] - spec.offset[i];

  double f = 0.0;
  switch (spec.fn) {
    case BbobFn::Sphere: f = sphere(z); break;
    case BbobFn::Rosenbrock: f = rosenbrock(z); break;
    case BbobFn::Discus: f = discus(z); break;
    case BbobFn::Rastrigin: f = rastrigin(z); break;
    case BbobFn::Schwefel: f = schwefel(z); break;
    case BbobFn::BuecheRastrigin: f = bueche_rastrigin(z); break;
    case BbobFn::AttractiveSector: f = attractive_sector(z); break;
    case BbobFn::Weierstrass: f = weierstrass(z); break;
    case BbobFn::SchaffersF7: f = schaffers_f7(z); break;
    case BbobFn::GriewankRosen: f = griewank_rosen(z); break;
  }
  return static_cast<float>(f);
}

TaskSpec sample_task(TaskSetName set, int dims, Rng& rng) {
  if (dims < 1) throw std::invalid_argument("sample_task: dims must be >= 1");
  const auto& members = task_set_members(set);
  TaskSpec spec;
  spec.fn = members[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<int>(members.size())))];
  spec.dims = dims;
  spec.offset.resize(static_cast<std::size_t>(dims));
  rng.fill_uniform(spec.offset, -3.0f, 3.0f);
  spec.seed = rng.next_u64();
  return spec;
}

// ---- control tasks ---------------------------------------------------------

namespace {

int mlp_param_count(const std::vector<int>& layout) {
  int n = 0;
  for (std::size_t l = 0; l + 1 < layout.size(); ++l) {
    n += layout[l] * layout[l + 1] + layout[l + 1];
  }
  return n;
}

// tanh MLP on all hidden layers; linear output.
float mlp_forward(const std::vector<int>& layout, std::span<const float> w,
                  std::span<const float> obs) {
  std::vector<float> cur(obs.begin(), obs.end());
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < layout.size(); ++l) {
    const int in = layout[l], out = layout[l + 1];
    std::vector<float> next(static_cast<std::size_t>(out));
    for (int j = 0; j < out; ++j) {
      float s = w[off + static_cast<std::size_t>(in) * out + j];  // bias
      for (int i = 0; i < in; ++i) {
        s += cur[static_cast<std::size_t>(i)] * w[off + static_cast<std::size_t>(i) * out + j];
      }
      next[static_cast<std::size_t>(j)] =
          (l + 2 < layout.size()) ? std::tanh(s) : s;
    }
    off += static_cast<std::size_t>(in) * out + out;
    cur = std::move(next);
  }
  return cur[0];
}

double cartpole_episode(const ControlTask& task, std::span<const float> w,
                        Rng& rng) {
  float s[4];
  for (float& v : s) v = rng.uniform(-0.05f, 0.05f);
  constexpr float kGravity = 9.8f, kMassCart = 1.0f, kMassPole = 0.1f;
  constexpr float kTotalMass = kMassCart + kMassPole;
  constexpr float kLength = 0.5f, kPoleMassLength = kMassPole * kLength;
  constexpr float kForceMag = 10.0f, kTau = 0.02f;
  constexpr float kThetaLimit = 0.20943951f, kXLimit = 2.4f;

  double ret = 0.0;
  for (int t = 0; t < task.episode_length; ++t) {
    const float obs[4] = {s[0], s[1], s[2], s[3]};
    const float force = mlp_forward(task.layout, w, obs) > 0.0f ? kForceMag
                                                                : -kForceMag;
    const float costh = std::cos(s[2]), sinth = std::sin(s[2]);
    const float temp =
        (force + kPoleMassLength * s[3] * s[3] * sinth) / kTotalMass;
    const float theta_acc =
        (kGravity * sinth - costh * temp) /
        (kLength * (4.0f / 3.0f - kMassPole * costh * costh / kTotalMass));
    const float x_acc = temp - kPoleMassLength * theta_acc * costh / kTotalMass;
    s[0] += kTau * s[1];
    s[1] += kTau * x_acc;
    s[2] += kTau * s[3];
    s[3] += kTau * theta_acc;
    ret += 1.0;
    if (std::abs(s[0]) > kXLimit || std::abs(s[2]) > kThetaLimit) break;
  }
  return ret;
}

float angle_normalize(float th) {
  const float two_pi = static_cast<float>(2.0 * kPi);
  float a = std::fmod(th + static_cast<float>(kPi), two_pi);
  if (a < 0.0f) a += two_pi;
  return a - static_cast<float>(kPi);
}

double pendulum_episode(const ControlTask& task, std::span<const float> w,
                        Rng& rng) {
  constexpr float kG = 10.0f, kM = 1.0f, kL = 1.0f, kDt = 0.05f;
  constexpr float kMaxTorque = 2.0f, kMaxSpeed = 8.0f;
  float th = rng.uniform(-static_cast<float>(kPi), static_cast<float>(kPi));
  float thdot = rng.uniform(-1.0f, 1.0f);

  double ret = 0.0;
  for (int t = 0; t < task.episode_length; ++t) {
    const float obs[3] = {std::cos(th), std::sin(th), thdot};
    const float u = kMaxTorque * std::tanh(mlp_forward(task.layout, w, obs));
    const float an = angle_normalize(th);
    ret -= static_cast<double>(an) * an + 0.1 * thdot * thdot + 0.001 * u * u;
    thdot += (3.0f * kG / (2.0f * kL) * std::sin(th) +
              3.0f / (kM * kL * kL) * u) *
             kDt;
    thdot = clipf(thdot, -kMaxSpeed, kMaxSpeed);
    th += thdot * kDt;
  }
  return ret;
}

}  // namespace

ControlTask make_cartpole(std::uint64_t seed) {
  ControlTask t;
  t.env = ControlTask::Env::CartPole;
  t.layout = {4, 16, 16, 1};
  t.seed = seed;
  return t;
}

ControlTask make_pendulum(std::uint64_t seed) {
  ControlTask t;
  t.env = ControlTask::Env::Pendulum;
  t.layout = {3, 16, 16, 1};
  t.seed = seed;
  return t;
}

int policy_param_count(const ControlTask& task) {
  return mlp_param_count(task.layout);
}

float eval_policy(const ControlTask& task, std::span<const float> flat_weights) {
  if (static_cast<int>(flat_weights.size()) != policy_param_count(task)) {
    throw std::invalid_argument("eval_policy: weight vector length mismatch");
  }
  const RngKey root = make_key(task.seed);
  double total = 0.0;
  for (int r = 0; r < task.num_rollouts; ++r) {
    Rng rng(split(root, static_cast<std::uint64_t>(r)));
    total += task.env == ControlTask::Env::CartPole
                 ? cartpole_episode(task, flat_weights, rng)
                 : pendulum_episode(task, flat_weights, rng);
  }
  return static_cast<float>(-total / static_cast<double>(task.num_rollouts));
}

}  // namespace evotf
