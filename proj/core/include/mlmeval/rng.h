#ifndef MLMEVAL_RNG_H_
#define MLMEVAL_RNG_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace mlmeval {

// SplitMix64 finalizer.
std::uint64_t Mix64(std::uint64_t x);

// Child seed for item `index` of a run seeded with `run_seed`:
//   Mix64(run_seed ^ Mix64(index + 0x9E3779B97F4A7C15)).
// Depends only on its arguments, so work can be scheduled in any order.
std::uint64_t DeriveSeed(std::uint64_t run_seed, std::uint64_t index);

// Seeded generator with platform-independent draws. The standard
// distributions are implementation-defined, so bounded integers and unit
// doubles are derived from the raw mt19937_64 stream here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t Next() { return engine_(); }

  // Uniform in [0, n). n must be > 0. Rejection sampling, no modulo bias.
  std::size_t UniformIndex(std::size_t n);

  // Uniform in [0, 1) with 53 bits.
  double UniformDouble();

  // Standard normal (Box-Muller, no cached second value).
  double Normal();

  // In-place Fisher-Yates.
  template <typename T>
  void Shuffle(std::vector<T> &values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = UniformIndex(i);
      std::swap(values[i - 1], values[j]);
    }
  }

  // `count` distinct indices from [0, n) in draw order (partial
  // Fisher-Yates). count is clamped to n.
  std::vector<std::size_t> SampleIndices(std::size_t n, std::size_t count);

 private:
  std::mt19937_64 engine_;
};

}  // namespace mlmeval

#endif  // MLMEVAL_RNG_H_
