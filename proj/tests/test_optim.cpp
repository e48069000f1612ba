#include <doctest.h>

#include <cmath>
#include <vector>

#include "evotf/optim.hpp"

using namespace evotf;
using ad::Tensor;

TEST_SUITE("optim") {

TEST_CASE("adam first step moves by ~lr regardless of gradient scale") {
  auto w = Tensor::param({1}, {1.0f});
  Adam opt({w}, AdamConfig{.lr = 0.001f});
  w.grad_mut()[0] = 0.1f;
  opt.step();
  CHECK(w.values()[0] == doctest::Approx(0.999).epsilon(1e-6));
}

TEST_CASE("adam trace matches a double-precision reference") {
  auto w = Tensor::param({1}, {0.5f});
  AdamConfig cfg{.lr = 0.01f};
  Adam opt({w}, cfg);

  double rw = 0.5, rm = 0.0, rv = 0.0;
  for (int t = 1; t <= 5; ++t) {
    // gradient of f(w) = w^2 at the current iterate
    const float g = 2.0f * w.values()[0];
    w.grad_mut()[0] = g;
    opt.step();

    const double rg = 2.0 * rw;
    rm = 0.9 * rm + 0.1 * rg;
    rv = 0.999 * rv + 0.001 * rg * rg;
    const double mhat = rm / (1.0 - std::pow(0.9, t));
    const double vhat = rv / (1.0 - std::pow(0.999, t));
    rw -= 0.01 * mhat / (std::sqrt(vhat) + 1e-8);
    CHECK(w.values()[0] == doctest::Approx(rw).epsilon(1e-5));
  }
}

TEST_CASE("global norm clip rescales exactly at the threshold") {
  auto a = Tensor::param({1}, {0.0f});
  auto b = Tensor::param({1}, {0.0f});
  a.grad_mut()[0] = 3.0f;
  b.grad_mut()[0] = 4.0f;
  std::vector<Tensor> params{a, b};
  const float norm = clip_global_norm(params, 1.0f);
  CHECK(norm == doctest::Approx(5.0).epsilon(1e-6));
  CHECK(a.grad()[0] == doctest::Approx(0.6).epsilon(1e-6));
  CHECK(b.grad()[0] == doctest::Approx(0.8).epsilon(1e-6));

  a.grad_mut()[0] = 0.3f;
  b.grad_mut()[0] = 0.4f;
  clip_global_norm(params, 1.0f);
  CHECK(a.grad()[0] == doctest::Approx(0.3).epsilon(1e-6));  // untouched
}

TEST_CASE("cosine schedule warms up to peak and decays to the floor") {
  const std::int64_t total = 200;  // warmup = 20
  const float peak = 0.0015f, fl = 1e-5f;
  CHECK(cosine_warmup_lr(0, total, peak, fl) ==
        doctest::Approx(peak / 20.0f).epsilon(1e-6));
  CHECK(cosine_warmup_lr(19, total, peak, fl) ==
        doctest::Approx(peak).epsilon(1e-6));
  CHECK(cosine_warmup_lr(199, total, peak, fl) ==
        doctest::Approx(fl).epsilon(1e-4));
  // strictly decreasing after the warmup
  for (std::int64_t s = 20; s < 199; ++s) {
    CHECK(cosine_warmup_lr(s, total, peak, fl) >
          cosine_warmup_lr(s + 1, total, peak, fl));
  }
}

}  // TEST_SUITE
