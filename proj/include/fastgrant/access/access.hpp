#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "fastgrant/sim/rng.hpp"
#include "fastgrant/sim/types.hpp"

namespace fastgrant::access {

/// Per-message delays of the RA handshake after the preamble (msg2..msg4).
struct HandshakeDelays {
  Millis msg2 = 2;
  Millis msg3 = 2;
  Millis msg4 = 2;
};

/// RA numerology. An RA slot is 1.08 MHz wide, i.e. 6 RBs; opportunities
/// recur every 1 to 20 ms.
struct RaConfig {
  Millis periodicity_ms = 5;
  int slots_per_opportunity = 1;
  int rbs_per_slot = 6;
  double capture_prob = 0.0;
  double acb_factor = 1.0;
  std::set<int> eab_barred_classes;
  Millis backoff_window_ms = 20;
  int max_attempts = 10;
  HandshakeDelays handshake;

  int ra_rbs() const { return rbs_per_slot * slots_per_opportunity; }
};

/// Uplink resources per 1 ms tick; RA slots are carved out at opportunity
/// ticks.
struct UplinkFrame {
  int total_rbs_per_ms = 50;
  int ra_rbs = 6;

  int data_rbs(bool ra_tick) const { return ra_tick ? total_rbs_per_ms - ra_rbs : total_rbs_per_ms; }
};

enum class AccessResult : std::uint8_t {
  kSuccess,
  kCollidedBarred,
  kAcbBarred,
  kEabBarred,
  kBackoff,
};

std::string_view to_string(AccessResult r);

struct AccessOutcome {
  MtdId mtd = 0;
  AccessResult result = AccessResult::kSuccess;
  std::optional<int> slot;
  int signaling_rb_units = 0;
};

struct Contender {
  MtdId mtd = 0;
  int eab_class = 0;
};

struct FilterResult {
  std::vector<MtdId> allowed;
  std::vector<MtdId> barred;
};

/// Each contender draws U(0,1) in input order and proceeds iff the draw is
/// below the broadcast factor.
FilterResult acb_filter(std::span<const MtdId> contenders, double acb_factor,
                        sim::RngStream& rng);

FilterResult eab_filter(std::span<const Contender> contenders,
                        const std::set<int>& barred_classes);

/// Slot choice and collision resolution for one opportunity. Every contender
/// is charged `rbs_per_slot` signaling units. Outcomes are in input order.
std::vector<AccessOutcome> ra_opportunity(std::span<const MtdId> contenders,
                                          const RaConfig& cfg,
                                          sim::RngStream& rng);

/// Tick from which data can flow after an RA success.
Millis handshake_complete_time(Millis success_at, const RaConfig& cfg);

/// First RA opportunity tick >= t (opportunities sit on multiples of the
/// periodicity).
Millis next_opportunity_at_or_after(Millis t, Millis periodicity_ms);

struct RaAttemptState {
  int attempts = 0;
  Millis next_attempt = 0;
  bool exhausted = false;
};

/// Records a failed attempt at `now` and picks the retry: the first
/// opportunity strictly after `now` and at or after now + U, U uniform on
/// [0, backoff_window]. Returns nullopt (and marks the state exhausted) once
/// max_attempts is reached.
std::optional<Millis> backoff_schedule(RaAttemptState& state, Millis now,
                                       const RaConfig& cfg, sim::RngStream& rng);

/// Round-robin dedicated opportunities: the i-th MTD (by id) owns slot
/// i % K of opportunity i / K within a cycle of ceil(N / K) opportunities.
class SlottedAssignment {
 public:
  SlottedAssignment() = default;
  SlottedAssignment(std::span<const MtdId> mtds, const RaConfig& cfg);

  std::size_t cycle_length() const { return cycle_; }
  std::optional<std::pair<std::size_t, int>> assignment(MtdId mtd) const;
  /// True iff `mtd` may transmit at the opportunity with this global index.
  bool owns(MtdId mtd, std::uint64_t opportunity_index) const;
  /// Number of slots assigned at this opportunity.
  int assigned_slots(std::uint64_t opportunity_index) const;

 private:
  std::map<MtdId, std::pair<std::size_t, int>> slots_;
  std::vector<int> per_opportunity_;
  std::size_t cycle_ = 0;
};

SlottedAssignment slotted_ra_assignment(std::span<const MtdId> mtds,
                                        const RaConfig& cfg);

struct UncoordinatedResult {
  MtdId mtd = 0;
  int rb = 0;
  bool delivered = false;
};

/// Each active MTD picks one of `data_rbs` RBs uniformly; sole occupants
/// deliver. With capture_prob > 0 a multi-occupant RB delivers one uniformly
/// chosen occupant with that probability. No signaling is charged.
std::vector<UncoordinatedResult> uncoordinated_round(std::span<const MtdId> active,
                                                     int data_rbs,
                                                     sim::RngStream& rng,
                                                     double capture_prob = 0.0);

}  // namespace fastgrant::access
