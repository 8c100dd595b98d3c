#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fastgrant/sim/rng.hpp"

namespace fastgrant::predict {

using Sequence = std::vector<std::uint8_t>;

/// Segment boundaries of a concatenated sequence: the start index of every
/// segment, ascending, first entry 0. Lag contexts never reach across a
/// boundary. An empty list means one segment.
using Segments = std::vector<std::size_t>;

struct GrangerResult {
  double score = 0.0;
  /// Target (or cause) constant: no test is possible, score is 0.
  bool degenerate = false;
};

/// Linear Granger test of x -> y. Restricted model: y_t on an intercept and
/// y_{t-1..t-max_lag}; full model adds x_{t-1..t-max_lag}. Returns
/// ln(RSS_restricted / RSS_full), clipped at 0.
///
/// Throws std::invalid_argument on unequal lengths, max_lag < 1, or
/// length <= 10 * max_lag.
GrangerResult granger_score(std::span<const std::uint8_t> x,
                            std::span<const std::uint8_t> y, int max_lag,
                            const Segments& segments = {});

/// Plug-in directed information rate in bits per sample:
/// mean over t of I(x_{t-k..t}; y_t | y_{t-k..t-1}), from empirical
/// frequencies, clipped at 0. k must be 1..8.
///
/// Throws std::invalid_argument when no position has a full context.
double directed_information(std::span<const std::uint8_t> x,
                            std::span<const std::uint8_t> y, int k,
                            const Segments& segments = {});

struct PermutationNull {
  double cutoff = 0.0;
  std::vector<double> samples;
};

/// Null distribution of `statistic` under shuffling of the cause sequence.
/// With more than one segment, each segment of the cause is replaced by the
/// cause segment of a randomly permuted episode (cut to length, or padded
/// with its last value); otherwise elements are shuffled. `cutoff` is the
/// `quantile` order statistic of the shuffled scores.
PermutationNull permutation_null(
    std::span<const std::uint8_t> cause, const Segments& segments,
    const std::function<double(std::span<const std::uint8_t>, const Segments&)>& statistic,
    int shuffles, double quantile, sim::RngStream& rng);

/// Splits [0, length) into (begin, end) index pairs.
std::vector<std::pair<std::size_t, std::size_t>> segment_ranges(const Segments& segments,
                                                                std::size_t length);

}  // namespace fastgrant::predict
