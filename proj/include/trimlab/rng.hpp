#pragma once
#include <array>
#include <cstdint>

namespace trimlab {

// SplitMix64 finalizer; also used as the documented stream-derivation hash:
// replica i draws from a generator seeded with mix64(master ^ (i+1)*GOLDEN).
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kStreamGolden = 0x9e3779b97f4a7c15ull;

/** Xoshiro256++ 1.0, seeded via SplitMix64. State is never all-zero. */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) {
      sm += 0x9e3779b97f4a7c15ull;
      std::uint64_t z = sm;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
      w = z ^ (z >> 31);
    }
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on [0,1): top 53 bits, so 1.0 is never returned.
  double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::array<std::uint64_t, 4> s_;
};

// Deterministic per-replica stream: independent of worker count and schedule.
inline Rng replica_rng(std::uint64_t master_seed, std::uint64_t replica) {
  return Rng(mix64(master_seed ^ ((replica + 1) * kStreamGolden)));
}

struct SeedRecord {
  std::uint64_t master = 0;
  std::uint64_t stream = 0;  // replica index the stream was derived for
};

}  // namespace trimlab
