#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace evotf {

// 128-bit key identifying an independent random stream.  Streams are
// counter-based: a draw is a hash of (key, counter), so any stream can be
// replayed from its key alone and children forked with split() never overlap
// their parent.
struct RngKey {
  std::uint64_t hi{0};
  std::uint64_t lo{0};

  friend bool operator==(const RngKey&, const RngKey&) = default;
};

RngKey make_key(std::uint64_t seed);

// Derive the index-th child key.  Distinct indices give statistically
// independent streams; the parent stream is unaffected.
RngKey split(const RngKey& key, std::uint64_t index);

class Rng {
 public:
  explicit Rng(RngKey key) : key_(key) {}
  explicit Rng(std::uint64_t seed) : key_(make_key(seed)) {}

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform01();

  // Uniform on [lo, hi); never returns hi even when rounding lands on it.
  float uniform(float lo, float hi);

  // Standard normal via Box-Muller.  Each call consumes two raw draws and
  // keeps no internal state beyond the counter.
  float normal();

  // Uniform integer in [lo, hi).
  int uniform_int(int lo, int hi);

  void fill_normal(std::span<float> out);
  void fill_uniform(std::span<float> out, float lo, float hi);
  std::vector<float> normal_vec(std::size_t n);

  RngKey key() const { return key_; }

 private:
  RngKey key_;
  std::uint64_t ctr_{0};
};

}  // namespace evotf
