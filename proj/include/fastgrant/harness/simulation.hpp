#pragma once

#include <cstdint>
#include <vector>

#include "fastgrant/harness/config.hpp"
#include "fastgrant/harness/metrics.hpp"
#include "fastgrant/predict/events.hpp"
#include "fastgrant/predict/periodic.hpp"
#include "fastgrant/sched/bandit.hpp"
#include "fastgrant/sim/trace.hpp"
#include "fastgrant/traffic/traffic.hpp"

namespace fastgrant::harness {

struct PlannedArrival {
  Millis t = 0;
  int size_rbs = 1;
  traffic::PacketSource source = traffic::PacketSource::kPeriodic;
  std::uint32_t origin = 0;
};

/// Everything the traffic substreams produce for one seed. Depends on the
/// traffic and cell settings only, never on the scheme.
struct GroundTruth {
  std::vector<Position> positions;
  /// Per MTD, sorted by time.
  std::vector<std::vector<PlannedArrival>> arrivals;
  std::vector<traffic::EventEpisode> episodes;

  /// FNV-1a over every planned arrival.
  std::uint64_t digest() const;
};

traffic::EventModel build_event_model(const SimConfig& cfg);
GroundTruth generate_ground_truth(const SimConfig& cfg, std::uint64_t seed);

struct QualityTick {
  Millis t = 0;
  std::uint32_t predicted = 0;
  std::uint32_t actual = 0;
  std::uint32_t hits = 0;
};

/// Optional outputs of a run.
struct RunOptions {
  sim::TraceSink* trace = nullptr;
  sched::RegretTrace* regret = nullptr;
  /// Episodes as the base station closed them.
  std::vector<predict::EpisodeRecord>* episodes = nullptr;
  std::vector<QualityTick>* quality = nullptr;
  /// Periodic estimates at the end of the run, indexed by MTD id.
  std::vector<predict::PeriodicEstimate>* estimates = nullptr;
  predict::CausalStats* causal_stats = nullptr;
};

/// One deterministic run. The config must be valid.
MetricsReport run(const SimConfig& cfg, std::uint64_t seed, const RunOptions& opts = {});
MetricsReport run(const SimConfig& cfg, const GroundTruth& truth, std::uint64_t seed,
                  const RunOptions& opts = {});

}  // namespace fastgrant::harness
