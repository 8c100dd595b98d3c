#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fastgrant::sim {

/// Mixes a 64-bit value (SplitMix64 finalizer).
std::uint64_t mix64(std::uint64_t x);

/// FNV-1a over the bytes of a label.
std::uint64_t hash_label(std::string_view label);

/// A reproducible random stream keyed by (master seed, substream label, index).
///
/// Every consumer in a run owns its own stream, so adding or removing a
/// consumer never shifts the draws seen by any other. The raw engine is
/// std::mt19937_64, whose output sequence is fixed by the standard; the
/// conversions to uniform/exponential/integer variates are done here rather
/// than through <random> distributions, whose algorithms are
/// implementation-defined.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t master_seed, std::string_view substream,
            std::uint64_t index = 0);

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform real in [0, 1) with 53 random bits.
  double uniform();

  /// Exponential variate with the given rate; throws on rate <= 0.
  double exponential(double rate);

  /// Uniform integer in the closed range [lo, hi] (unbiased).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
};

}  // namespace fastgrant::sim
