#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fastgrant/predict/history.hpp"
#include "fastgrant/sim/types.hpp"

namespace fastgrant::predict {

struct PeriodicComponent {
  Millis period_ms = 1;
  Millis phase_ms = 0;
  int size_rbs = 1;
  /// support / number of periodic observations of the MTD.
  double confidence = 0.0;
  /// Largest observed deviation from the nominal schedule.
  Millis margin_ms = 0;
  std::size_t support = 0;

  /// Smallest nominal arrival phase + k*period that is >= t.
  Millis next_nominal_at_or_after(Millis t) const;
};

struct PeriodicEstimate {
  MtdId mtd = 0;
  /// Sorted by confidence, highest first.
  std::vector<PeriodicComponent> components;
  /// QoS the base station attaches to this MTD's reports (used for urgency).
  Millis max_delay_ms = 1000;

  bool empty() const { return components.empty(); }
};

struct PeriodEstimatorConfig {
  std::size_t min_support = 5;
  /// Half-width of the acceptance window around a candidate period.
  Millis tolerance_ms = 10;
  /// Largest residual standard deviation, relative to the period.
  double max_relative_spread = 0.1;
  Millis max_period_ms = 86'400'000;
  /// Only the most recent observations are used.
  std::size_t max_observations = 128;
  std::size_t max_candidates = 48;
};

/// Recovers the periodic components of one MTD's periodic-tagged
/// observations.
///
/// Candidate periods come from the histogram of pairwise inter-arrival gaps;
/// each candidate folds the remaining observations onto its circle, keeps the
/// densest arc (at most one observation per cycle), and refines the period by
/// a least-squares fit of time against cycle index. The candidate explaining
/// the most observations wins, its observations are removed, and the search
/// repeats. Fewer than `min_support` observations yields an empty estimate.
PeriodicEstimate estimate_periods(std::span<const Observation> observations,
                                  MtdId mtd, const PeriodEstimatorConfig& cfg);
PeriodicEstimate estimate_periods(const TxHistory& history, MtdId mtd,
                                  const PeriodEstimatorConfig& cfg);

enum class PredictionSource : std::uint8_t { kPeriodic, kEventCascade };

std::string_view to_string(PredictionSource s);

struct PredictedActivity {
  MtdId mtd = 0;
  int expected_size_rbs = 1;
  /// Slack to the earliest possible deadline of the predicted packet.
  Millis urgency_ms = 0;
  PredictionSource source = PredictionSource::kPeriodic;
  /// Nominal (predicted) arrival time.
  Millis expected_at = 0;
};

struct Prediction {
  Millis t = 0;
  /// Sorted by MTD id, no duplicates.
  std::vector<PredictedActivity> predicted_active;
};

/// Lists an MTD iff one of its components with confidence >= threshold has
/// a nominal arrival n with [n - margin, n + margin] meeting [t, t+lookahead).
Prediction predict_periodic_active(std::span<const PeriodicEstimate> estimates,
                                   Millis t, Millis lookahead_ms,
                                   double confidence_threshold = 0.0);

}  // namespace fastgrant::predict
