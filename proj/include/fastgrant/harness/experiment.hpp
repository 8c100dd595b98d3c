#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fastgrant/harness/config.hpp"
#include "fastgrant/harness/metrics.hpp"
#include "fastgrant/harness/simulation.hpp"
#include "fastgrant/predict/events.hpp"
#include "fastgrant/traffic/traffic.hpp"

namespace fastgrant::harness {

struct ExperimentResult {
  /// One per seed, in seed-list order.
  std::vector<MetricsReport> runs;
  std::vector<std::vector<QualityTick>> quality;
  AggregateReport aggregate;
};

/// One run per configured seed, spread over worker threads. With output.dir
/// set, writes reports.jsonl and aggregate.json plus per-seed trace, regret,
/// quality and episode files as enabled. I/O failures throw
/// std::runtime_error naming the file.
ExperimentResult run_experiment(const SimConfig& cfg);

/// coordinated, slotted, uncoordinated, fug.
std::vector<Scheme> comparison_schemes();

struct ComparisonRow {
  Scheme scheme = Scheme::kCoordinated;
  std::vector<MetricsReport> runs;
  AggregateReport aggregate;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  /// Arrival digest per seed; every row ran against these.
  std::vector<std::uint64_t> truth_digests;

  std::string to_text() const;
  std::string to_jsonl() const;
};

/// Runs each scheme over the same per-seed ground truth.
ComparisonTable compare_schemes(const SimConfig& cfg, std::span<const Scheme> schemes = {});

struct QualityPoint {
  Millis t = 0;
  std::optional<double> precision;
  std::optional<double> recall;
};

struct QualitySeries {
  std::vector<QualityPoint> ticks;
  /// Micro-averaged over all ticks; precision is null when nothing was
  /// predicted, recall when nothing was active.
  std::optional<double> precision;
  std::optional<double> recall;
};

QualitySeries prediction_quality(std::span<const QualityTick> ticks);

/// One line per activation: {"event_id":E,"mtd_id":M,"t_activate":T}.
std::string episodes_to_jsonl(std::span<const traffic::EventEpisode> episodes);
/// Groups a dump back into episodes; throws std::runtime_error with the line
/// number on malformed input.
std::vector<predict::EpisodeRecord> parse_episodes(const std::string& text);

/// One line per ordered pair (i, j) co-observed in the episodes:
/// {"i","j","coactivation","granger","granger_cutoff","di","di_cutoff"}.
std::string causality_matrix_jsonl(std::span<const predict::EpisodeRecord> episodes,
                                   const predict::CausalityConfig& cfg, std::uint64_t seed);

}  // namespace fastgrant::harness
