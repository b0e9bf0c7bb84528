#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fedtwin {

// SplitMix64 finalizer. Used to derive decorrelated seeds for independent
// RNG streams (per client, per round) from one experiment seed.
std::uint64_t mix64(std::uint64_t z);

// Seed for the stream identified by (seed, stream, step). Client k in round t
// draws from stream_seed(seed, k + 1, t); the centralized trainer uses
// stream 1 in epoch t so that a single-client federated run replays the
// centralized trajectory exactly.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream,
                          std::uint64_t step);

// mt19937_64 with explicit output mappings. The standard leaves
// uniform_real_distribution / normal_distribution / shuffle unspecified, so
// all mappings are spelled out here to keep runs reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller (no cached spare)
  double normal();

  // [0, n) via the multiply-shift reduction
  std::uint64_t bounded(std::uint64_t n);

  // Fisher-Yates
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::vector<int> permutation(int n);

 private:
  std::mt19937_64 gen_;
};

}  // namespace fedtwin
