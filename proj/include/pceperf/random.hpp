#ifndef PCEPERF_RANDOM_HPP
#define PCEPERF_RANDOM_HPP

#include <cstdint>
#include <random>

namespace pceperf {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of stream `index` under the master `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

/// One reproducible stream of uniforms. The engine is std::mt19937_64, whose
/// output sequence is fixed by the standard; the uniform mapping is done here
/// (std distributions are implementation-defined), so streams are bit-exact
/// across platforms.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t index) : engine_(derive_seed(seed, index)) {}

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() noexcept {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal by inversion (one uniform per variate).
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace pceperf

#endif  // PCEPERF_RANDOM_HPP
