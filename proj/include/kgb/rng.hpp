#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace kgb {

// All randomness in the library flows through the primitives below so that
// results are reproducible from a single seed and independent of platform,
// thread schedule, and evaluation order. The generator is SplitMix64: a
// Weyl sequence with increment 0x9E3779B97F4A7C15 passed through the
// Stafford mix13 finalizer. Streams are cheap values; sub-streams are
// derived by rehashing the parent key with an integer label.

inline constexpr std::uint64_t kWeylIncrement = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

// Derives an independent child key from (key, label). Used for member
// seeds, per-iteration tree noise, and every other sub-stream, so adding
// members or reordering work never perturbs existing streams.
constexpr std::uint64_t derive_key(std::uint64_t key, std::uint64_t label) {
  return mix64((key ^ mix64(label + kWeylIncrement)) + kWeylIncrement);
}

constexpr std::uint64_t derive_key(std::uint64_t key, std::uint64_t a, std::uint64_t b) {
  return derive_key(derive_key(key, a), b);
}

namespace detail {

// 53-bit mantissa scaling; yields values in [0, 1).
constexpr double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

}  // namespace detail

// Counter-based stream: output i is mix64(key + i * increment). The state is
// two integers, so forking and replaying are trivial.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kWeylIncrement); }

  // Uniform on the open interval (0, 1); exact-zero draws are rejected so
  // log(-log(u)) stays finite.
  double next_unit_open() {
    for (;;) {
      const double u = detail::to_unit(next_u64());
      if (u > 0.0) return u;
    }
  }

  // Standard normal via Box-Muller. No caching: each call consumes exactly
  // two uniforms, which keeps replay independent of call pairing.
  double next_gaussian() {
    const double u1 = next_unit_open();
    const double u2 = next_unit_open();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  RngStream fork(std::uint64_t label) const { return RngStream(derive_key(key_, label)); }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Stateless keyed uniform in (0, 1). Indexing noise by (key, a, b) makes
// per-candidate draws schedule-independent: parallel scorers see the same
// noise a sequential loop would.
inline double keyed_unit_open(std::uint64_t key, std::uint64_t a, std::uint64_t b) {
  std::uint64_t k = derive_key(key, a, b);
  for (std::uint64_t salt = 0;; ++salt) {
    const double u = detail::to_unit(mix64(k + salt * kWeylIncrement));
    if (u > 0.0) return u;
  }
}

// Gumbel(0, 1) noise, the perturbation that turns argmax split selection
// into softmax sampling.
inline double gumbel_from_unit(double u) { return -std::log(-std::log(u)); }

}  // namespace kgb
