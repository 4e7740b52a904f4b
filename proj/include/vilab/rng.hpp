#pragma once

#include <cmath>
#include <cstdint>

namespace vilab {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t key, std::uint64_t a) {
  return splitmix64(key ^ splitmix64(a + 0x632be59bd9b4e019ULL));
}

}  // namespace detail

/// Counter-based random stream: every draw is a pure function of
/// (key, index pair), so draws can be generated in any order, in
/// parallel, and repeated without consuming state. Sub-streams are
/// derived with fork().
class CounterRng {
 public:
  CounterRng() = default;
  explicit CounterRng(std::uint64_t seed) : key_(detail::splitmix64(seed)) {}

  CounterRng fork(std::uint64_t tag) const {
    return CounterRng::from_key(detail::mix(key_, tag));
  }

  std::uint64_t bits(std::uint64_t a, std::uint64_t b) const {
    return detail::mix(detail::mix(key_, a), b);
  }

  /// Uniform draw in (0, 1]. Never returns 0, so log(u) is always finite.
  double uniform(std::uint64_t a, std::uint64_t b) const {
    return (static_cast<double>(bits(a, b) >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller, determined entirely by (key, a, b).
  double normal(std::uint64_t a, std::uint64_t b) const {
    const std::uint64_t r = bits(a, b);
    const double u1 = (static_cast<double>(r >> 11) + 1.0) * 0x1.0p-53;
    const double u2 =
        (static_cast<double>(detail::splitmix64(r) >> 11) + 1.0) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t a, std::uint64_t b, std::uint64_t n) const {
    return bits(a, b) % n;
  }

  std::uint64_t key() const { return key_; }

 private:
  static CounterRng from_key(std::uint64_t k) {
    CounterRng r;
    r.key_ = k;
    return r;
  }
  std::uint64_t key_ = 0;
};

}  // namespace vilab
