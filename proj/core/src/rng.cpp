#include "evotf/rng.hpp"

#include <cmath>
#include <numbers>

namespace evotf {
namespace {

// MurmurHash3 finalizer; full avalanche on 64 bits.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 33;
  z *= 0xff51afd7ed558ccdULL;
  z ^= z >> 33;
  z *= 0xc4ceb9fe1a85ec53ULL;
  z ^= z >> 33;
  return z;
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

}  // namespace

RngKey make_key(std::uint64_t seed) {
  return RngKey{mix64(seed ^ kGolden), mix64(seed + 0xbf58476d1ce4e5b9ULL)};
}

RngKey split(const RngKey& key, std::uint64_t index) {
  RngKey child;
  child.hi = mix64(key.hi ^ mix64(index + kGolden));
  child.lo = mix64(key.lo + 0xd1b54a32d192ed03ULL * (index + 1));
  return child;
}

std::uint64_t Rng::next_u64() {
  std::uint64_t v = mix64(key_.hi ^ ctr_++);
  return mix64(key_.lo ^ v);
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

float Rng::uniform(float lo, float hi) {
  float v = lo + static_cast<float>(uniform01()) * (hi - lo);
  if (v >= hi) v = std::nextafter(hi, lo);
  return v;
}

float Rng::normal() {
  double u1 = 1.0 - uniform01();  // (0, 1], keeps log() finite
  double u2 = uniform01();
  double r = std::sqrt(-2.0 * std::log(u1));
  return static_cast<float>(r * std::cos(2.0 * std::numbers::pi * u2));
}

int Rng::uniform_int(int lo, int hi) {
  auto range = static_cast<std::uint64_t>(hi - lo);
  auto scaled = static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(next_u64()) * range) >> 64);
  return lo + static_cast<int>(scaled);
}

void Rng::fill_normal(std::span<float> out) {
  for (float& v : out) v = normal();
}

void Rng::fill_uniform(std::span<float> out, float lo, float hi) {
  for (float& v : out) v = uniform(lo, hi);
}

std::vector<float> Rng::normal_vec(std::size_t n) {
  std::vector<float> out(n);
  fill_normal(out);
  return out;
}

}  // namespace evotf
