#include "evotf/features.hpp"

#include <cmath>
#include <stdexcept>

#include "evotf/teachers.hpp"

namespace evotf {

PathState make_path_state(int dims) {
  if (dims < 1) throw std::invalid_argument("make_path_state: dims must be >= 1");
  PathState ps;
  for (auto& p : ps.p_mu) p.assign(static_cast<std::size_t>(dims), 0.0f);
  for (auto& p : ps.p_sigma) p.assign(static_cast<std::size_t>(dims), 0.0f);
  ps.best_x.assign(static_cast<std::size_t>(dims), 0.0f);
  return ps;
}

Vec solution_features(const Mat& X, const Vec& F, const Vec& mu,
                      const Vec& sigma, const Vec& best_x) {
  const int n = X.rows, d = X.cols;
  const std::size_t gen_best = argmin(F);
  const float* gb = X.row(static_cast<int>(gen_best));

  Vec out(static_cast<std::size_t>(n) * d * kDX);
  for (int i = 0; i < n; ++i) {
    const float* row = X.row(i);
    for (int j = 0; j < d; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      const float s = (row[j] - mu[ju]) / sigma[ju];
      float* f = out.data() + (static_cast<std::size_t>(i) * d + ju) * kDX;
      f[0] = s;
      f[1] = s * s;
      f[2] = (row[j] - gb[j]) / sigma[ju];
      f[3] = (row[j] - best_x[ju]) / sigma[ju];
      f[4] = clipf(s, -5.0f, 5.0f);
    }
  }
  return out;
}

Vec fitness_features(const Vec& F, float best_f_prev) {
  const auto n = F.size();
  const Vec ranks = centered_rank(F);
  const Vec utils = snes_utilities(static_cast<int>(n));
  const float mean = vec_mean(F);
  const float sd = vec_std(F) + 1e-10f;
  float fmin = F[0], fmax = F[0];
  for (float v : F) {
    fmin = std::min(fmin, v);
    fmax = std::max(fmax, v);
  }
  const std::size_t best = argmin(F);

  // utility per candidate: rank r gets utils[r]
  Vec util_by_cand(n);
  {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return F[a] < F[b]; });
    for (std::size_t r = 0; r < n; ++r) util_by_cand[order[r]] = utils[r];
  }

  Vec out(n * kDF);
  for (std::size_t i = 0; i < n; ++i) {
    float* f = out.data() + i * kDF;
    f[0] = F[i] < best_f_prev ? 1.0f : 0.0f;
    f[1] = (F[i] - mean) / sd;
    f[2] = ranks[i];
    f[3] = (F[i] - fmin) / (fmax - fmin + 1e-10f) - 0.5f;
    f[4] = util_by_cand[i];
    f[5] = i == best ? 1.0f : 0.0f;
  }
  return out;
}

Vec distribution_features(const Mat& X, const Vec& F, const Vec& mu,
                          const Vec& sigma, const PathState& ps) {
  const int n = X.rows, d = X.cols;
  const Vec ranks = centered_rank(F);
  const Vec utils = snes_utilities(n);
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return F[a] < F[b]; });

  double lnsum = 0.0;
  for (int j = 0; j < d; ++j) {
    lnsum += std::log(static_cast<double>(sigma[static_cast<std::size_t>(j)]));
  }
  const auto lnmean = static_cast<float>(lnsum / d);

  Vec out(static_cast<std::size_t>(d) * kDD);
  for (int j = 0; j < d; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    float fd = 0.0f, gm = 0.0f, gs = 0.0f;
    for (int i = 0; i < n; ++i) {
      const float s = (X.at(i, j) - mu[ju]) / sigma[ju];
      fd += ranks[static_cast<std::size_t>(i)] * s;
    }
    fd /= static_cast<float>(n);
    for (std::size_t r = 0; r < order.size(); ++r) {
      const float s =
          (X.at(static_cast<int>(order[r]), j) - mu[ju]) / sigma[ju];
      gm += utils[r] * s;
      gs += utils[r] * (s * s - 1.0f);
    }
    float* f = out.data() + ju * kDD;
    f[0] = fd;
    f[1] = gm;
    f[2] = gs;
    for (std::size_t c = 0; c < kPathTimescales.size(); ++c) {
      f[3 + c] = ps.p_mu[c][ju];
      f[6 + c] = ps.p_sigma[c][ju];
    }
    f[9] = std::log(sigma[ju]) - lnmean;
  }
  return out;
}

GenFeatures featurize_generation(const Mat& X, const Vec& F, const Vec& mu,
                                 const Vec& sigma, PathState& ps) {
  const int n = X.rows, d = X.cols;
  if (d != static_cast<int>(mu.size()) || mu.size() != sigma.size() ||
      n != static_cast<int>(F.size()) ||
      ps.best_x.size() != mu.size()) {
    throw std::invalid_argument("featurize_generation: shape mismatch");
  }

  GenFeatures gf;
  gf.N = n;
  gf.D = d;
  gf.fitness = fitness_features(F, ps.best_f);

  const std::size_t best = argmin(F);
  if (F[best] < ps.best_f) {
    ps.best_f = F[best];
    const float* row = X.row(static_cast<int>(best));
    ps.best_x.assign(row, row + d);
  }

  gf.solution = solution_features(X, F, mu, sigma, ps.best_x);
  gf.distribution = distribution_features(X, F, mu, sigma, ps);

  // path recurrence: p <- (1-c) p + c g, applied after featurization so the
  // features always describe the pre-update paths
  for (int j = 0; j < d; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    const float gm = gf.distribution[ju * kDD + 1];
    const float gs = gf.distribution[ju * kDD + 2];
    for (std::size_t c = 0; c < kPathTimescales.size(); ++c) {
      const float tc = kPathTimescales[c];
      ps.p_mu[c][ju] = (1.0f - tc) * ps.p_mu[c][ju] + tc * gm;
      ps.p_sigma[c][ju] = (1.0f - tc) * ps.p_sigma[c][ju] + tc * gs;
    }
  }
  ++ps.generation;
  return gf;
}

}  // namespace evotf
