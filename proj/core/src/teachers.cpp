#include "evotf/teachers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "evotf/errors.hpp"

namespace evotf {
namespace {

void check_shapes(const EsState& state, const Mat& X, const Vec& F,
                  const char* who) {
  const auto d = static_cast<int>(state.mu.size());
  if (state.sigma.size() != state.mu.size()) {
    throw std::invalid_argument(std::string(who) + ": mu/sigma length mismatch");
  }
  if (X.cols != d || X.rows != static_cast<int>(F.size()) || X.rows < 2) {
    throw std::invalid_argument(std::string(who) + ": population shape mismatch");
  }
}

// Indices of F sorted ascending, ties by index.
std::vector<std::size_t> rank_order(const Vec& F) {
  std::vector<std::size_t> order(F.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return F[a] < F[b]; });
  return order;
}

}  // namespace

EsState make_es_state(Vec mu, Vec sigma) {
  if (mu.size() != sigma.size() || mu.empty()) {
    throw std::invalid_argument("make_es_state: mu/sigma must match and be nonempty");
  }
  for (float s : sigma) {
    if (!(s > 0.0f)) throw std::invalid_argument("make_es_state: sigma must be > 0");
  }
  EsState st;
  st.mu = std::move(mu);
  st.sigma = std::move(sigma);
  return st;
}

TeacherAlgo teacher_from_name(const std::string& name) {
  if (name == "snes") return TeacherAlgo::Snes;
  if (name == "sepcmaes") return TeacherAlgo::SepCmaEs;
  if (name == "openes") return TeacherAlgo::OpenEs;
  if (name == "hillclimb") return TeacherAlgo::HillClimb;
  throw ConfigError("unknown teacher '" + name +
                    "' (snes|sepcmaes|openes|hillclimb)");
}

const char* teacher_name(TeacherAlgo algo) {
  switch (algo) {
    case TeacherAlgo::Snes: return "snes";
    case TeacherAlgo::SepCmaEs: return "sepcmaes";
    case TeacherAlgo::OpenEs: return "openes";
    case TeacherAlgo::HillClimb: return "hillclimb";
  }
  return "?";
}

Mat ask_gaussian(const EsState& state, Rng& rng, int N) {
  if (N < 2) throw std::invalid_argument("ask: N must be >= 2");
  const auto d = static_cast<int>(state.mu.size());
  Mat X(N, d);
  for (int i = 0; i < N; ++i) {
    float* row = X.row(i);
    for (int j = 0; j < d; ++j) {
      row[j] = state.mu[static_cast<std::size_t>(j)] +
               state.sigma[static_cast<std::size_t>(j)] * rng.normal();
    }
  }
  return X;
}

Mat ask_antithetic(const EsState& state, Rng& rng, int N) {
  if (N < 2 || N % 2 != 0) {
    throw std::invalid_argument("ask_antithetic: N must be even and >= 2");
  }
  const auto d = static_cast<int>(state.mu.size());
  Mat X(N, d);
  for (int i = 0; i < N; i += 2) {
    float* pos = X.row(i);
    float* neg = X.row(i + 1);
    for (int j = 0; j < d; ++j) {
      const float delta = state.sigma[static_cast<std::size_t>(j)] * rng.normal();
      pos[j] = state.mu[static_cast<std::size_t>(j)] + delta;
      neg[j] = state.mu[static_cast<std::size_t>(j)] - delta;
    }
  }
  return X;
}

Mat ask_teacher(TeacherAlgo algo, const EsState& state, Rng& rng, int N) {
  return algo == TeacherAlgo::OpenEs ? ask_antithetic(state, rng, N)
                                     : ask_gaussian(state, rng, N);
}

Vec snes_utilities(int N) {
  if (N < 2) throw std::invalid_argument("snes_utilities: N must be >= 2");
  Vec u(static_cast<std::size_t>(N));
  double sum = 0.0;
  for (int i = 0; i < N; ++i) {
    const double v = std::max(
        0.0, std::log(N / 2.0 + 1.0) - std::log(static_cast<double>(i + 1)));
    u[static_cast<std::size_t>(i)] = static_cast<float>(v);
    sum += v;
  }
  for (int i = 0; i < N; ++i) {
    u[static_cast<std::size_t>(i)] = static_cast<float>(
        static_cast<double>(u[static_cast<std::size_t>(i)]) / sum -
        1.0 / static_cast<double>(N));
  }
  return u;
}

EsState tell_snes(const EsState& state, const Mat& X, const Vec& F,
                  float eta_mu, float eta_sigma) {
  check_shapes(state, X, F, "tell_snes");
  const auto d = static_cast<std::size_t>(X.cols);
  if (eta_sigma < 0.0f) {
    eta_sigma = (3.0f + std::log(static_cast<float>(d))) /
                (5.0f * std::sqrt(static_cast<float>(d)));
  }
  const Vec u = snes_utilities(X.rows);
  const auto order = rank_order(F);

  EsState next = state;
  for (std::size_t j = 0; j < d; ++j) {
    float gm = 0.0f, gs = 0.0f;
    for (std::size_t r = 0; r < order.size(); ++r) {
      const float s = (X.at(static_cast<int>(order[r]), static_cast<int>(j)) -
                       state.mu[j]) /
                      state.sigma[j];
      gm += u[r] * s;
      gs += u[r] * (s * s - 1.0f);
    }
    next.mu[j] = state.mu[j] + eta_mu * state.sigma[j] * gm;
    next.sigma[j] = state.sigma[j] * std::exp(0.5f * eta_sigma * gs);
  }
  ++next.generation;
  return next;
}

EsState tell_sepcmaes(const EsState& state, const Mat& X, const Vec& F) {
  check_shapes(state, X, F, "tell_sepcmaes");
  const int lambda = X.rows;
  const auto d = static_cast<std::size_t>(X.cols);
  const auto dn = static_cast<float>(d);

  EsState next = state;
  if (next.cma_step <= 0.0f) {  // lazy init from the current sigma vector
    next.cma_step = 1.0f;
    next.cma_diag.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      next.cma_diag[j] = state.sigma[j] * state.sigma[j];
    }
    next.cma_psigma.assign(d, 0.0f);
    next.cma_pc.assign(d, 0.0f);
  }

  // recombination weights over the top half
  const int mu_n = lambda / 2;
  std::vector<double> w(static_cast<std::size_t>(mu_n));
  double wsum = 0.0;
  for (int i = 0; i < mu_n; ++i) {
    w[static_cast<std::size_t>(i)] =
        std::log(mu_n + 0.5) - std::log(static_cast<double>(i + 1));
    wsum += w[static_cast<std::size_t>(i)];
  }
  double w2 = 0.0;
  for (auto& v : w) {
    v /= wsum;
    w2 += v * v;
  }
  const double mu_eff = 1.0 / w2;

  const double c_sigma = (mu_eff + 2.0) / (dn + mu_eff + 5.0);
  const double d_sigma =
      1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff - 1.0) / (dn + 1.0)) - 1.0) +
      c_sigma;
  const double c_c = (4.0 + mu_eff / dn) / (dn + 4.0 + 2.0 * mu_eff / dn);
  const double sep_boost = (dn + 2.0) / 3.0;  // diagonal-update acceleration
  const double c_1 =
      std::min(1.0, sep_boost * 2.0 / ((dn + 1.3) * (dn + 1.3) + mu_eff));
  const double c_mu = std::min(
      1.0 - c_1, sep_boost * 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) /
                     ((dn + 2.0) * (dn + 2.0) + mu_eff));
  const double chi_n =
      std::sqrt(dn) * (1.0 - 1.0 / (4.0 * dn) + 1.0 / (21.0 * dn * dn));

  const auto order = rank_order(F);
  const float step = next.cma_step;

  // weighted recombination of the top mu_n candidates
  Vec new_mu(d, 0.0f);
  for (int r = 0; r < mu_n; ++r) {
    const float* row = X.row(static_cast<int>(order[static_cast<std::size_t>(r)]));
    for (std::size_t j = 0; j < d; ++j) {
      new_mu[j] += static_cast<float>(w[static_cast<std::size_t>(r)]) * row[j];
    }
  }

  // paths
  double psig_sq = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double delta = (static_cast<double>(new_mu[j]) - state.mu[j]) / step;
    const double csd = std::sqrt(next.cma_diag[j]);
    const double ps =
        (1.0 - c_sigma) * next.cma_psigma[j] +
        std::sqrt(c_sigma * (2.0 - c_sigma) * mu_eff) * delta / csd;
    next.cma_psigma[j] = static_cast<float>(ps);
    psig_sq += ps * ps;
  }
  const int g1 = state.generation + 1;
  const double ps_norm = std::sqrt(psig_sq);
  const double denom =
      std::sqrt(1.0 - std::pow(1.0 - c_sigma, 2.0 * static_cast<double>(g1)));
  const bool h_sigma =
      ps_norm / denom < (1.4 + 2.0 / (dn + 1.0)) * chi_n;

  for (std::size_t j = 0; j < d; ++j) {
    const double delta = (static_cast<double>(new_mu[j]) - state.mu[j]) / step;
    const double pc = (1.0 - c_c) * next.cma_pc[j] +
                      (h_sigma ? std::sqrt(c_c * (2.0 - c_c) * mu_eff) * delta
                               : 0.0);
    next.cma_pc[j] = static_cast<float>(pc);
  }

  // diagonal covariance: rank-one + rank-mu
  for (std::size_t j = 0; j < d; ++j) {
    double rank_mu = 0.0;
    for (int r = 0; r < mu_n; ++r) {
      const float* row =
          X.row(static_cast<int>(order[static_cast<std::size_t>(r)]));
      const double y = (static_cast<double>(row[j]) - state.mu[j]) / step;
      rank_mu += w[static_cast<std::size_t>(r)] * y * y;
    }
    const double pc = next.cma_pc[j];
    const double old = next.cma_diag[j];
    double c_new = (1.0 - c_1 - c_mu) * old +
                   c_1 * (pc * pc + (h_sigma ? 0.0 : c_c * (2.0 - c_c) * old)) +
                   c_mu * rank_mu;
    next.cma_diag[j] = static_cast<float>(std::max(c_new, 1e-20));
  }

  next.cma_step =
      step * static_cast<float>(
                 std::exp(c_sigma / d_sigma * (ps_norm / chi_n - 1.0)));
  next.mu = new_mu;
  for (std::size_t j = 0; j < d; ++j) {
    next.sigma[j] = next.cma_step * std::sqrt(next.cma_diag[j]);
  }
  ++next.generation;
  return next;
}

EsState tell_openes(const EsState& state, const Mat& X, const Vec& F,
                    float lr) {
  check_shapes(state, X, F, "tell_openes");
  const int n = X.rows;
  const auto d = static_cast<std::size_t>(X.cols);
  if (n % 2 != 0) {
    throw std::invalid_argument("tell_openes: population must be antithetic (even N)");
  }
  // verify pairing in z-space
  for (int i = 0; i < n; i += 2) {
    for (std::size_t j = 0; j < d; ++j) {
      const float zp = (X.at(i, static_cast<int>(j)) - state.mu[j]) / state.sigma[j];
      const float zn =
          (X.at(i + 1, static_cast<int>(j)) - state.mu[j]) / state.sigma[j];
      if (std::abs(zp + zn) > 1e-3f * std::max(1.0f, std::abs(zp))) {
        throw std::invalid_argument(
            "tell_openes: population is not antithetic");
      }
    }
  }

  const Vec shaped = centered_rank(F);
  EsState next = state;
  if (next.adam_m.empty()) {
    next.adam_m.assign(d, 0.0f);
    next.adam_v.assign(d, 0.0f);
  }
  ++next.adam_t;
  const float b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
  const float bc1 = 1.0f - std::pow(b1, static_cast<float>(next.adam_t));
  const float bc2 = 1.0f - std::pow(b2, static_cast<float>(next.adam_t));
  for (std::size_t j = 0; j < d; ++j) {
    float g = 0.0f;
    for (int i = 0; i < n; ++i) {
      const float z = (X.at(i, static_cast<int>(j)) - state.mu[j]) / state.sigma[j];
      g += shaped[static_cast<std::size_t>(i)] * z;
    }
    g /= static_cast<float>(n);
    next.adam_m[j] = b1 * next.adam_m[j] + (1.0f - b1) * g;
    next.adam_v[j] = b2 * next.adam_v[j] + (1.0f - b2) * g * g;
    const float mhat = next.adam_m[j] / bc1;
    const float vhat = next.adam_v[j] / bc2;
    next.mu[j] = state.mu[j] - lr * mhat / (std::sqrt(vhat) + eps);
  }
  ++next.generation;  // sigma unchanged by design
  return next;
}

EsState tell_hillclimb(const EsState& state, const Mat& X, const Vec& F,
                       float gamma) {
  check_shapes(state, X, F, "tell_hillclimb");
  const auto d = static_cast<std::size_t>(X.cols);
  EsState next = state;
  const std::size_t best = argmin(F);
  if (!next.has_best || F[best] < next.best_f) {
    next.best_f = F[best];
    next.best_x.assign(X.row(static_cast<int>(best)),
                       X.row(static_cast<int>(best)) + d);
    next.has_best = true;
    next.mu = next.best_x;
  }
  for (std::size_t j = 0; j < d; ++j) next.sigma[j] = state.sigma[j] * gamma;
  ++next.generation;
  return next;
}

EsState tell_teacher(TeacherAlgo algo, const EsState& state, const Mat& X,
                     const Vec& F) {
  switch (algo) {
    case TeacherAlgo::Snes: return tell_snes(state, X, F);
    case TeacherAlgo::SepCmaEs: return tell_sepcmaes(state, X, F);
    case TeacherAlgo::OpenEs: return tell_openes(state, X, F);
    case TeacherAlgo::HillClimb: return tell_hillclimb(state, X, F);
  }
  throw std::invalid_argument("tell_teacher: unknown algorithm");
}

}  // namespace evotf
