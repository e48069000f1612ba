#include "evotf/distill.hpp"

#include <cmath>

#include "evotf/errors.hpp"

namespace evotf {

float kl_gaussian_diag(const Vec& mu_e, const Vec& sigma_e, const Vec& mu_t,
                       const Vec& sigma_t) {
  if (mu_e.size() != sigma_e.size() || mu_e.size() != mu_t.size() ||
      mu_e.size() != sigma_t.size())
    throw NumericError("kl_gaussian_diag: size mismatch");
  double kl = 0.0;
  for (std::size_t d = 0; d < mu_e.size(); ++d) {
    const double se = sigma_e[d], st = sigma_t[d];
    if (se <= 0.0 || st <= 0.0)
      throw NumericError("kl_gaussian_diag: sigmas must be positive");
    const double r = se / st;
    const double m = (static_cast<double>(mu_t[d]) - mu_e[d]) / st;
    kl += r * r + 2.0 * std::log(st / se) + m * m - 1.0;
  }
  return static_cast<float>(0.5 * kl);
}

TrajectoryBatch pack_batch(const std::vector<Trajectory>& batch) {
  std::vector<std::vector<GenFeatures>> feats;
  feats.reserve(batch.size());
  for (const Trajectory& t : batch) feats.push_back(t.features);
  return pack_trajectories(feats);
}

ad::Tensor distillation_loss(const ad::Tensor& updates,
                             const std::vector<Trajectory>& batch) {
  const int B = updates.dim(0), D = updates.dim(1), G = updates.dim(2);
  if (B != static_cast<int>(batch.size()))
    throw ConfigError("distillation_loss: batch size mismatch");

  // Substituting mu_e = mu + sigma*out_mu, sigma_e = sigma*exp(out_sigma)
  // into the KL gives, per dimension,
  //   1/2 [ c1*exp(2 out_sigma) - 2 out_sigma + (e1 - e2*out_mu)^2 + c2 - 1 ]
  // with host-side constants c1 = sigma^2/sigma_t^2, c2 = 2 ln(sigma_t/sigma),
  // e1 = (mu_t - mu)/sigma_t, e2 = sigma/sigma_t.
  const std::size_t n = static_cast<std::size_t>(B) * static_cast<std::size_t>(D) *
                        static_cast<std::size_t>(G);
  std::vector<float> c1(n), c2m1(n), e1(n), e2(n);
  for (int b = 0; b < B; ++b) {
    const Trajectory& t = batch[static_cast<std::size_t>(b)];
    if (t.generations() != G || static_cast<int>(t.mu_pre[0].size()) != D)
      throw ConfigError("distillation_loss: trajectory shape mismatch");
    for (int g = 0; g < G; ++g) {
      const auto gz = static_cast<std::size_t>(g);
      for (int d = 0; d < D; ++d) {
        const auto dz = static_cast<std::size_t>(d);
        const double sg = t.sigma_pre[gz][dz], st = t.sigma_post[gz][dz];
        if (sg <= 0.0 || st <= 0.0)
          throw NumericError("distillation_loss: non-positive sigma");
        const std::size_t i =
            (static_cast<std::size_t>(b) * static_cast<std::size_t>(D) + dz) *
                static_cast<std::size_t>(G) +
            gz;
        c1[i] = static_cast<float>((sg / st) * (sg / st));
        c2m1[i] = static_cast<float>(2.0 * std::log(st / sg) - 1.0);
        e1[i] = static_cast<float>(
            (static_cast<double>(t.mu_post[gz][dz]) - t.mu_pre[gz][dz]) / st);
        e2[i] = static_cast<float>(sg / st);
      }
    }
  }
  const ad::Shape s{B, D, G, 1};
  ad::Tensor tc1 = ad::Tensor::from(s, std::move(c1));
  ad::Tensor tc2m1 = ad::Tensor::from(s, std::move(c2m1));
  ad::Tensor te1 = ad::Tensor::from(s, std::move(e1));
  ad::Tensor te2 = ad::Tensor::from(s, std::move(e2));

  ad::Tensor out_mu = ad::slice_lastdim(updates, 0, 1);
  ad::Tensor out_sig = ad::slice_lastdim(updates, 1, 1);
  ad::Tensor term = ad::mul(tc1, ad::exp(ad::scale(out_sig, 2.0f)));
  term = ad::sub(term, ad::scale(out_sig, 2.0f));
  term = ad::add(term, ad::square(ad::sub(te1, ad::mul(te2, out_mu))));
  term = ad::add(term, tc2m1);
  return ad::scale(ad::sum_all(term),
                   0.5f / (static_cast<float>(B) * static_cast<float>(G)));
}

}  // namespace evotf
