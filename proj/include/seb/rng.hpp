#pragma once

#include <cassert>
#include <cstdint>
#include <numeric>
#include <vector>

namespace seb {

// splitmix64 (Steele, Lea & Flood). One u64 of state, output is identical on
// every platform, and derived streams are cheap. All randomness in the
// library flows through this generator; files that record a seed also record
// this algorithm name so runs can be reproduced elsewhere.
inline constexpr const char* kPrngId = "splitmix64";

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Unbiased draw in [0, bound) via bitmask rejection.
  std::uint64_t next_below(std::uint64_t bound) {
    assert(bound > 0);
    std::uint64_t mask = bound - 1;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    for (;;) {
      std::uint64_t v = next_u64() & mask;
      if (v < bound) return v;
    }
  }

  // Uniform in [lo, hi_exclusive).
  int next_int(int lo, int hi_exclusive) {
    assert(lo < hi_exclusive);
    return lo + static_cast<int>(next_below(
                    static_cast<std::uint64_t>(hi_exclusive - lo)));
  }

  // Uniform in [0, 1), 53 random bits.
  double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  bool next_bernoulli(double p) { return next_double() < p; }

 private:
  std::uint64_t state_;
};

// Named sub-streams so unrelated parts of a run never share a generator.
enum class Stream : std::uint64_t {
  kParamInit = 1,
  kMapping = 2,
  kPartition = 3,
  kClientSample = 4,
  kClientBatch = 5,
  kSyntheticCorpus = 6,
  kCoverage = 7,
  kTopicalBatch = 8,
};

// Double application of the splitmix64 finalizer over (seed, stream, index).
inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream,
                                 std::uint64_t index = 0) {
  auto mix = [](std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t s = mix(
      seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(stream) + 1));
  return mix(s + 0xbf58476d1ce4e5b9ULL * (index + 1));
}

template <typename T>
void shuffle(std::vector<T>& v, SplitMix64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(v[i - 1], v[j]);
  }
}

// First `count` entries of a random permutation of [0, population).
inline std::vector<int> sample_without_replacement(int population, int count,
                                                   SplitMix64& rng) {
  assert(population >= 0);
  if (count > population) count = population;
  std::vector<int> idx(static_cast<std::size_t>(population));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < count; ++i) {
    int j = i + static_cast<int>(
                    rng.next_below(static_cast<std::uint64_t>(population - i)));
    std::swap(idx[static_cast<std::size_t>(i)],
              idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(count));
  return idx;
}

}  // namespace seb
