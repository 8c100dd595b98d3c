#include "fastgrant/sim/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace fastgrant::sim {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RngStream::RngStream(std::uint64_t master_seed, std::string_view substream,
                     std::uint64_t index)
    : key_(mix64(mix64(master_seed) ^ mix64(hash_label(substream)) ^
                 mix64(index * 0xd1b54a32d192ed03ULL + 1))),
      engine_(key_) {}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::exponential(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw std::invalid_argument("exponential rate must be positive");
  }
  return -std::log1p(-uniform()) / rate;
}

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo);
  if (span == ~std::uint64_t{0}) return lo + static_cast<std::int64_t>(engine_());
  const std::uint64_t n = span + 1;
  // Rejection sampling on the largest multiple of n.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return lo + static_cast<std::int64_t>(r % n);
}

}  // namespace fastgrant::sim
