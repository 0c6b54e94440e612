#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace taildep::rng {

// Philox4x64-10 counter-based generator (Salmon et al., matches numpy's
// Philox bit stream for the same key/counter). Streams are cheap value
// types: copying one forks the stream state.
class Philox {
 public:
  Philox() = default;
  explicit Philox(std::uint64_t key0, std::uint64_t key1 = 0) : key_{key0, key1} {}

  std::uint64_t next_u64() {
    if (idx_ == 4) {
      block();
      idx_ = 0;
    }
    return out_[idx_++];
  }

  // Jump to an absolute 256-bit counter position (little-endian words).
  void set_counter(std::uint64_t c0, std::uint64_t c1 = 0, std::uint64_t c2 = 0,
                   std::uint64_t c3 = 0) {
    ctr_[0] = c0; ctr_[1] = c1; ctr_[2] = c2; ctr_[3] = c3;
    idx_ = 4;
    have_spare_ = false;
  }

  // Uniform on (0,1), both endpoints excluded.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire-style rejection keeps the draw unbiased.
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      std::uint64_t t = (0 - n) % n;
      while (lo < t) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  double exponential() { return -std::log(uniform()); }

  // Standard normal via Box-Muller; the spare value is cached, so normal()
  // parity is part of the stream state.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double t = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

  // Deterministic child stream; independent of draws made on the parent.
  Philox child(std::uint64_t tag) const {
    return Philox(mix(key_[0] ^ mix(tag)), mix(key_[1] + 0x9e3779b97f4a7c15ull + tag));
  }

  static std::uint64_t mix(std::uint64_t z) {
    // splitmix64 finalizer
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  static void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
    const __uint128_t p = static_cast<__uint128_t>(a) * b;
    hi = static_cast<std::uint64_t>(p >> 64);
    lo = static_cast<std::uint64_t>(p);
  }

  void block() {
    constexpr std::uint64_t M0 = 0xd2e7470ee14c6c93ull;
    constexpr std::uint64_t M1 = 0xca5a826395121157ull;
    constexpr std::uint64_t W0 = 0x9e3779b97f4a7c15ull;
    constexpr std::uint64_t W1 = 0xbb67ae8584caa73bull;
    // 256-bit little-endian increment happens before the mix, so the first
    // emitted block sits at counter 1. Matches the reference stream.
    if (++ctr_[0] == 0 && ++ctr_[1] == 0 && ++ctr_[2] == 0) ++ctr_[3];
    std::uint64_t s0 = ctr_[0], s1 = ctr_[1], s2 = ctr_[2], s3 = ctr_[3];
    std::uint64_t k0 = key_[0], k1 = key_[1];
    for (int round = 0; round < 10; ++round) {
      std::uint64_t hi0, lo0, hi1, lo1;
      mulhilo(M0, s0, hi0, lo0);
      mulhilo(M1, s2, hi1, lo1);
      const std::uint64_t n0 = hi1 ^ s1 ^ k0;
      const std::uint64_t n1 = lo1;
      const std::uint64_t n2 = hi0 ^ s3 ^ k1;
      const std::uint64_t n3 = lo0;
      s0 = n0; s1 = n1; s2 = n2; s3 = n3;
      k0 += W0; k1 += W1;
    }
    out_[0] = s0; out_[1] = s1; out_[2] = s2; out_[3] = s3;
  }

  std::uint64_t key_[2]{0, 0};
  std::uint64_t ctr_[4]{0, 0, 0, 0};
  std::uint64_t out_[4]{0, 0, 0, 0};
  int idx_ = 4;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Stream keyed by (global seed, dataset index, replication index).
// Identical keys reproduce identical draws regardless of worker count.
inline Philox stream(std::uint64_t seed, std::uint64_t dataset, std::uint64_t replication) {
  return Philox(seed).child(dataset).child(replication);
}

// Domain tags used to derive non-overlapping substreams from one seed.
namespace domain {
inline constexpr std::uint64_t kSites = 0x5349544553ull;        // site draws
inline constexpr std::uint64_t kParams = 0x504152414d53ull;     // parameter draws
inline constexpr std::uint64_t kDatasets = 0x44415441ull;       // per-dataset roots
inline constexpr std::uint64_t kSplit = 0x53504c4954ull;        // split shuffles
inline constexpr std::uint64_t kInit = 0x494e4954ull;           // network init
inline constexpr std::uint64_t kShuffle = 0x53485546ull;        // epoch shuffles
inline constexpr std::uint64_t kEval = 0x4556414cull;           // held-out evaluation groups
}  // namespace domain

}  // namespace taildep::rng
