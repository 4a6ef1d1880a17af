#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace hlsga {

using Rng = std::mt19937_64;

/// Named consumers of randomness. Each gets its own stream derived from the
/// master seed, so adding a new consumer never shifts the draws of an
/// existing one. Values are part of the reproducibility contract: never
/// renumber, only append.
enum class SeedStream : std::uint64_t {
  kSplit = 1,     // dataset sampling
  kInit = 2,      // weight initialisation + minibatch order (per evaluation)
  kGa = 3,        // selection, crossover and mutation draws
  kSbx = 4,       // real-valued SBX / polynomial mutation draws
  kRefresh = 5,   // optional Adam refresh inside the line search
  kSynth = 6,     // synthetic data generation
  kRandomSearch = 7,
};

/// splitmix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// sub_seed = mix(mix(master ^ mix(stream)) + counter).
constexpr std::uint64_t derive_seed(std::uint64_t master, SeedStream stream,
                                    std::uint64_t counter = 0) {
  return mix64(mix64(master ^ mix64(static_cast<std::uint64_t>(stream))) + counter);
}

inline Rng make_rng(std::uint64_t master, SeedStream stream, std::uint64_t counter = 0) {
  return Rng(derive_seed(master, stream, counter));
}

/// Uniform double in [0, 1) built from the top 53 bits. Used instead of
/// std::uniform_real_distribution wherever a draw has to be reproducible
/// across standard libraries.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n), rejection-sampled so the modulo is unbiased.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

/// Standard normal draw (Box-Muller on uniform01).
double standard_normal(Rng& rng);

/// In-place Fisher-Yates shuffle driven by uniform_index.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace hlsga
