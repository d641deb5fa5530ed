#pragma once

#include <cstdint>
#include <limits>

namespace rieszstop {

/// Counter-based generator: the i-th output of stream `s` under seed `k` is a
/// pure function of (k, s, i). Streams are split by hashing the stream id into
/// the key, so work can be partitioned across threads without changing output.
///
/// Satisfies UniformRandomBitGenerator, so the std distributions apply.
class CounterRng {
public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(mix(seed ^ 0x9e3779b97f4a7c15ULL) + stream * 0xd1b54a32d192ed03ULL)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + (counter_++) * 0x9e3779b97f4a7c15ULL); }

  /// Independent child stream; deterministic in (parent key, id).
  CounterRng split(std::uint64_t id) const {
    CounterRng child(0);
    child.key_ = mix(key_ ^ mix(id + 0x632be59bd9b4e019ULL));
    return child;
  }

  /// Uniform on the open interval (0, 1).
  double uniform() { return ((*this)() >> 11) * 0x1.0p-53 + 0x1.0p-54; }

  std::uint64_t counter() const { return counter_; }

private:
  // SplitMix64 finalizer.
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace rieszstop
