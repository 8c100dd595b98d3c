#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fastgrant/access/access.hpp"
#include "fastgrant/predict/events.hpp"
#include "fastgrant/predict/periodic.hpp"
#include "fastgrant/sched/bandit.hpp"
#include "fastgrant/sched/qlearning.hpp"
#include "fastgrant/sim/trace.hpp"
#include "fastgrant/traffic/traffic.hpp"

namespace fastgrant::harness {

enum class Scheme : std::uint8_t { kCoordinated, kSlotted, kUncoordinated, kFug };

std::string_view to_string(Scheme s);
std::optional<Scheme> parse_scheme(std::string_view text);

struct CellConfig {
  int mtd_count = 100;
  int uplink_rbs_per_ms = 50;
  double radius_m = 500.0;
  /// EAB class of MTD i is i % eab_classes.
  int eab_classes = 1;
};

enum class TrafficMode : std::uint8_t { kPeriodic, kSaturated };

struct AppConfig {
  traffic::PeriodicProfile profile;
  /// Draw the phase uniformly per MTD instead of using profile.phase_ms.
  bool random_phase = true;
};

enum class Topology : std::uint8_t { kNone, kChain, kStar, kEdges };

struct EventsConfig {
  double rate_per_ms = 0.0;
  Topology topology = Topology::kNone;
  /// Chain: nodes first..first+nodes-1 in order. Star: first is the hub.
  MtdId first_mtd = 0;
  int nodes = 0;
  Millis delay_ms = 2;
  double trigger_prob = 1.0;
  std::vector<traffic::PropagationEdge> edges;
  traffic::EpicenterRule epicenter = traffic::EpicenterRule::kFixed;
  MtdId fixed_epicenter = 0;
  double disk_radius_m = 100.0;
  int packets_per_activation = 1;
  int size_rbs = 1;
  traffic::QosSpec qos{100, 1.0};
};

struct TrafficConfig {
  TrafficMode mode = TrafficMode::kPeriodic;
  std::vector<AppConfig> apps;
  /// Only MTDs with id < periodic_mtds run the apps; unset means all.
  std::optional<int> periodic_mtds;
  traffic::QosSpec qos;
  EventsConfig events;
};

struct UncoordinatedConfig {
  double transmit_prob = 1.0;
  double capture_prob = 0.0;
};

enum class PredictorKind : std::uint8_t { kNone, kPeriodic, kOracle };

std::string_view to_string(PredictorKind k);

struct PredictorConfig {
  PredictorKind kind = PredictorKind::kPeriodic;
  Millis lookahead_ms = 10;
  double confidence_threshold = 0.5;
  predict::PeriodEstimatorConfig estimator;
  bool events = true;
  predict::EventDetectorConfig detector;
  double p_threshold = 0.5;
  predict::ScorePolicy score_policy = predict::ScorePolicy::kCoactivation;
  bool smoothing = false;
  predict::CausalityConfig causality;
};

struct FugConfig {
  Millis grant_wait_ms = 10;
  Millis grant_interval_ms = 1;
  /// Grants per interval; unset derives it from the data RBs.
  std::optional<int> budget;
  int grant_rbs = 1;
  /// Cadence of RA opportunities kept for fallback; unset uses ra.periodicity_ms.
  std::optional<Millis> fallback_periodicity_ms;
  PredictorConfig predictor;
  sched::Policy policy = sched::Policy::kEdf;
  sched::BanditParams bandit;
  sched::QParams q;
  sched::RewardKind reward = sched::RewardKind::kOnTime;
};

struct OutputConfig {
  std::string dir;
  sim::TraceLevel trace_level = sim::TraceLevel::kNone;
  bool episodes = false;
  bool regret = false;
};

struct SimConfig {
  Scheme scheme = Scheme::kCoordinated;
  Millis horizon_ms = 10'000;
  /// Packets created before this are left out of latency, miss-rate and
  /// prediction statistics (not out of conservation).
  Millis warmup_ms = 0;
  std::vector<std::uint64_t> seeds{1};
  CellConfig cell;
  TrafficConfig traffic;
  access::RaConfig ra;
  UncoordinatedConfig uncoordinated;
  FugConfig fug;
  OutputConfig output;
  /// Worker threads for seed sweeps; 0 means hardware concurrency.
  int threads = 0;

  access::UplinkFrame frame() const;
  Millis fallback_periodicity() const;
};

struct ConfigError {
  std::string path;
  std::string message;
};

class ConfigErrors : public std::runtime_error {
 public:
  explicit ConfigErrors(std::vector<ConfigError> errors);
  const std::vector<ConfigError>& errors() const { return errors_; }

 private:
  std::vector<ConfigError> errors_;
};

/// Parses and validates a JSON config. Every problem is collected; a
/// non-empty list throws ConfigErrors.
SimConfig parse_config(const std::string& text);
/// Validation only, for configs built in code. Returns all errors.
std::vector<ConfigError> validate(const SimConfig& cfg);
/// JSON text that parse_config maps back to an equal config.
std::string serialize_config(const SimConfig& cfg);

bool operator==(const SimConfig& a, const SimConfig& b);

}  // namespace fastgrant::harness
