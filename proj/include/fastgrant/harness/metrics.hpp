#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fastgrant/sim/types.hpp"

namespace fastgrant::harness {

struct MtdCounts {
  MtdId mtd = 0;
  std::uint64_t generated = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t residual = 0;
  bool conserved() const { return generated == delivered + dropped + residual; }
};

/// Latency histogram in whole ms.
class LatencyHistogram {
 public:
  void add(Millis latency);
  std::uint64_t count() const { return count_; }
  /// Nearest-rank percentile; nullopt when empty.
  std::optional<Millis> percentile(double q) const;
  std::optional<double> mean() const;
  const std::map<Millis, std::uint64_t>& bins() const { return bins_; }

 private:
  std::map<Millis, std::uint64_t> bins_;
  std::uint64_t count_ = 0;
  double sum_ = 0.0;
};

struct MetricsReport {
  std::string scheme;
  std::uint64_t seed = 0;

  std::uint64_t generated = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t residual = 0;
  std::vector<MtdCounts> per_mtd;

  // RA (coordinated, slotted, and FUG fallback).
  std::uint64_t ra_attempts = 0;
  std::uint64_t ra_successes = 0;
  std::uint64_t ra_collisions = 0;
  std::uint64_t acb_barred = 0;
  std::uint64_t eab_barred = 0;
  std::uint64_t ra_exhausted = 0;
  std::uint64_t handshake_messages = 0;
  std::uint64_t wasted_ra_slots = 0;
  // Uncoordinated.
  std::uint64_t uncoordinated_transmissions = 0;
  std::uint64_t uncoordinated_collisions = 0;
  // FUG.
  std::uint64_t grant_intervals = 0;
  std::uint64_t broadcast_messages = 0;
  std::uint64_t grants = 0;
  std::uint64_t grant_rb_units = 0;
  std::uint64_t wasted_grants = 0;
  std::uint64_t wasted_grant_rb_units = 0;
  std::uint64_t grant_overlaps = 0;
  std::uint64_t fallbacks = 0;
  std::uint64_t delivered_via_grant = 0;
  std::uint64_t delivered_via_ra = 0;
  std::uint64_t delivered_via_uncoordinated = 0;
  // Event packets that did not originate at the epicenter.
  std::uint64_t cascade_packets = 0;
  std::uint64_t cascade_via_grant = 0;
  std::uint64_t episodes_detected = 0;

  /// Primary-mechanism collisions: RA attempts for coordinated and slotted,
  /// uncoordinated transmissions, grant RB overlaps for FUG.
  std::uint64_t collision_count = 0;
  std::optional<double> collision_probability;
  /// 6 RB units per RA attempt.
  std::uint64_t signaling_rb_units = 0;

  LatencyHistogram latency;
  /// Over packets created at or after warmup.
  std::uint64_t measured_delivered = 0;
  std::uint64_t measured_dropped = 0;
  std::optional<double> deadline_miss_rate;
  std::optional<double> waste_fraction;

  std::optional<double> precision;
  std::optional<double> recall;
  std::uint64_t predicted_total = 0;
  std::uint64_t actual_total = 0;
  std::uint64_t true_positives = 0;

  std::string policy;
  std::optional<double> cumulative_regret;
  std::uint64_t regret_rounds = 0;

  std::uint64_t trace_records = 0;
  std::string trace_digest;

  bool conserved() const;
  /// Named scalar metrics; missing optionals are omitted.
  std::vector<std::pair<std::string, double>> scalars() const;
  /// One JSON object on a single line.
  std::string to_json() const;
};

struct AggregateMetric {
  std::size_t n = 0;
  double mean = 0.0;
  /// Sample standard deviation / sqrt(n); 0 for n = 1.
  double se = 0.0;
};

struct AggregateReport {
  std::string scheme;
  std::size_t runs = 0;
  std::map<std::string, AggregateMetric> metrics;
  std::string to_json() const;
};

AggregateReport aggregate(std::span<const MetricsReport> runs);

}  // namespace fastgrant::harness
