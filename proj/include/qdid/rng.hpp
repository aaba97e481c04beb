#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace qdid {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Domain tags so that simulation and bootstrap streams never collide.
enum class StreamTag : std::uint64_t {
  bootstrap = 0x62,
  simulation = 0x73,
  mc_bootstrap = 0x6d,
};

/// Deterministic substream key for (seed, tag, indices...).
inline std::uint64_t stream_key(std::uint64_t seed, StreamTag tag,
                                std::initializer_list<std::uint64_t> indices) {
  std::uint64_t h = detail::splitmix64(seed ^ detail::splitmix64(static_cast<std::uint64_t>(tag)));
  for (std::uint64_t i : indices) h = detail::splitmix64(h ^ detail::splitmix64(i + 1));
  return h;
}

/// mt19937_64 keyed by a substream. Normal variates come from
/// std::normal_distribution (Marsaglia polar method in libstdc++), so
/// streams are reproducible for a given standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : engine_(key) {}
  Rng(std::uint64_t seed, StreamTag tag, std::initializer_list<std::uint64_t> indices)
      : engine_(stream_key(seed, tag, indices)) {}

  double normal() { return normal_(engine_); }
  double exponential() { return exponential_(engine_); }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::exponential_distribution<double> exponential_{1.0};
};

}  // namespace qdid
