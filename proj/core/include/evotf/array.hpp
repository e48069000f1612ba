#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace evotf {

using Vec = std::vector<float>;

// Row-major matrix of floats for plain (non-differentiable) numerics.
struct Mat {
  int rows{0};
  int cols{0};
  Vec data;

  Mat() = default;
  Mat(int r, int c, float fill = 0.0f)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  float* row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
  const float* row(int i) const {
    return data.data() + static_cast<std::size_t>(i) * cols;
  }
  float& at(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  float at(int i, int j) const {
    return data[static_cast<std::size_t>(i) * cols + j];
  }
};

inline float vec_mean(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += x;
  return v.empty() ? 0.0f : static_cast<float>(s / static_cast<double>(v.size()));
}

// Population standard deviation (divides by n, not n-1).
inline float vec_std(std::span<const float> v) {
  if (v.empty()) return 0.0f;
  double m = vec_mean(v);
  double s = 0.0;
  for (float x : v) s += (x - m) * (x - m);
  return static_cast<float>(std::sqrt(s / static_cast<double>(v.size())));
}

inline std::size_t argmin(std::span<const float> v) {
  if (v.empty()) throw std::invalid_argument("argmin on empty span");
  return static_cast<std::size_t>(
      std::min_element(v.begin(), v.end()) - v.begin());
}

inline float clipf(float x, float lo, float hi) {
  return std::min(std::max(x, lo), hi);
}

// Ascending fitness ranks mapped to [-0.5, 0.5]; the best (lowest) value gets
// -0.5.  Ties are broken by index, matching a stable argsort.
inline Vec centered_rank(std::span<const float> f) {
  const std::size_t n = f.size();
  if (n < 2) throw std::invalid_argument("centered_rank needs >= 2 values");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
  Vec out(n);
  for (std::size_t r = 0; r < n; ++r) {
    out[order[r]] =
        static_cast<float>(r) / static_cast<float>(n - 1) - 0.5f;
  }
  return out;
}

}  // namespace evotf
