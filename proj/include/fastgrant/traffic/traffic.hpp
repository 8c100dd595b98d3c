#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "fastgrant/sim/rng.hpp"
#include "fastgrant/sim/types.hpp"

namespace fastgrant::traffic {

struct QosSpec {
  Millis max_delay_ms = 1000;
  double packet_value = 1.0;

  void validate() const;
};

enum class ArrivalMode : std::uint8_t { kJittered, kNhpp };

/// One periodic application on an MTD.
///
/// In jittered mode arrivals sit at phase + k*period + U, U uniform on
/// [-jitter, +jitter]. In NHPP mode `rate_profile` holds per-ms intensities
/// over equal segments of one period, repeated; the profile is shifted by the
/// phase.
struct PeriodicProfile {
  std::uint32_t app_id = 0;
  Millis period_ms = 1000;
  Millis phase_ms = 0;
  Millis jitter_ms = 0;
  int size_rbs = 1;
  ArrivalMode mode = ArrivalMode::kJittered;
  std::vector<double> rate_profile;

  /// Throws std::invalid_argument on phase >= period, 2*jitter >= period,
  /// non-positive sizes, or an empty/negative NHPP profile.
  void validate() const;
  double rate_at(double t_ms) const;
  double rate_max() const;
};

struct Arrival {
  Millis t = 0;
  int size_rbs = 1;
};

/// Lewis-Shedler thinning against the constant envelope `rate_max`.
/// Returns sorted arrival times in [0, horizon). Throws std::domain_error
/// when a sampled rate exceeds the envelope.
std::vector<double> sample_nhpp(const std::function<double(double)>& rate_fn,
                                double rate_max, Millis horizon_ms,
                                sim::RngStream& rng);

std::vector<Arrival> gen_periodic_arrivals(const PeriodicProfile& profile,
                                           Millis horizon_ms,
                                           sim::RngStream& rng);

struct PropagationEdge {
  MtdId from = 0;
  MtdId to = 0;
  Millis delay_ms = 1;
  double trigger_prob = 1.0;
};

enum class EpicenterRule : std::uint8_t {
  kUniformRandomMtd,
  /// A uniform point in the cell; the nearest participant within
  /// `disk_radius_m` of it detects the event (none in range: undetected).
  kSpatialDisk,
  kFixed,
};

struct EventModel {
  double event_rate_per_ms = 0.0;
  std::vector<PropagationEdge> edges;
  EpicenterRule epicenter_rule = EpicenterRule::kUniformRandomMtd;
  double disk_radius_m = 100.0;
  double cell_radius_m = 500.0;
  MtdId fixed_epicenter = 0;
  /// MTDs that can be an epicenter; empty means every MTD.
  std::vector<MtdId> participants;
  int packets_per_activation = 1;
  int size_rbs = 1;

  void validate() const;
};

struct Activation {
  MtdId mtd = 0;
  Millis t = 0;

  friend bool operator==(const Activation&, const Activation&) = default;
};

struct EventEpisode {
  std::uint32_t event_id = 0;
  Millis onset_ms = 0;
  MtdId epicenter = 0;
  /// Sorted by (t, mtd).
  std::vector<Activation> activations;
};

/// Propagates one event from `epicenter` at `onset`. Nodes are settled in
/// activation-time order; each outgoing edge fires once with its trigger
/// probability and activates its head at t + delay unless already active.
std::vector<Activation> propagate_event(const EventModel& model,
                                        MtdId epicenter, Millis onset,
                                        sim::RngStream& rng);

/// Homogeneous Poisson onsets over [0, horizon), one propagation per onset.
/// Activations at or beyond the horizon are dropped.
std::vector<EventEpisode> gen_event_schedule(const EventModel& model,
                                             std::span<const Position> positions,
                                             Millis horizon_ms,
                                             sim::RngStream& rng);

enum class PacketSource : std::uint8_t { kPeriodic, kEvent, kSaturated };

enum class PacketState : std::uint8_t {
  kPending,
  kDelivered,
  kDroppedDeadline,
  kResidual,
};

struct Packet {
  std::uint64_t id = 0;
  MtdId mtd = 0;
  PacketSource source = PacketSource::kPeriodic;
  /// App id for periodic packets, event id for event packets.
  std::uint32_t origin = 0;
  Millis created_at = 0;
  int size_rbs = 1;
  Millis deadline = 0;
  double value = 1.0;
  PacketState state = PacketState::kPending;
};

using PacketQueue = std::deque<Packet>;

Packet make_packet(std::uint64_t id, MtdId mtd, PacketSource source,
                   std::uint32_t origin, Millis created_at, int size_rbs,
                   const QosSpec& qos);

enum class AccessState : std::uint8_t {
  kIdle,
  kAwaitingGrant,
  kInRa,
  kBackoff,
  /// RA succeeded; data goes out once the handshake completes.
  kConnected,
};

struct Mtd {
  MtdId id = 0;
  int eab_class = 0;
  Position position;
  std::vector<PeriodicProfile> apps;
  QosSpec qos;
  PacketQueue queue;
  AccessState access_state = AccessState::kIdle;
};

/// Uniform point in a disk of the given radius.
Position sample_position(double radius_m, sim::RngStream& rng);

}  // namespace fastgrant::traffic
