#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fastgrant/sim/types.hpp"
#include "fastgrant/traffic/traffic.hpp"

namespace fastgrant::grant {

enum class FugMode : std::uint8_t { kIdle, kAwaitingGrant, kRaFallback };

std::string_view to_string(FugMode m);

struct MtdFugState {
  FugMode mode = FugMode::kIdle;
  Millis timer_expiry = 0;
  /// Bumped whenever a timer is armed, so stale expiry events can be told
  /// apart from the live one.
  std::uint64_t generation = 0;
};

struct Grant {
  MtdId mtd = 0;
  int rb_allocation = 1;
  Millis issued_at = 0;
  std::uint64_t interval_id = 0;
  /// First RB of the contiguous allocation.
  int first_rb = 0;
};

struct GrantBroadcast {
  std::uint64_t interval_id = 0;
  Millis issued_at = 0;
  std::vector<Grant> grants;
  /// One broadcast message per interval regardless of grant count.
  static constexpr int kSignalingMessages = 1;
  int total_rbs() const;
  /// True iff no two grants share an RB and all fit in [0, data_rbs).
  bool valid(int data_rbs) const;
};

enum class ArrivalTransition : std::uint8_t {
  kStartedWaiting,
  kUnchanged,
  /// grant_wait is 0: straight to RA.
  kFallback,
};

ArrivalTransition on_data_arrival(MtdFugState& state, Millis t, Millis grant_wait_ms);

struct GrantOutcome {
  std::vector<traffic::Packet> delivered;
  int used_rbs = 0;
  /// rb_allocation when the queue was empty, else 0.
  int wasted_rbs = 0;
  bool wasted() const { return wasted_rbs > 0; }
};

/// Sends head-of-queue packets while they fit in the allocation. Delivered
/// packets leave the queue marked delivered; an emptied queue returns the
/// MTD to idle.
GrantOutcome on_grant(MtdFugState& state, traffic::PacketQueue& queue, const Grant& grant,
                      Millis t);

/// Moves an awaiting MTD whose live timer expires at t into RA fallback.
/// Returns false for stale or early expiries.
bool on_timer_expiry(MtdFugState& state, Millis t, std::uint64_t generation);

/// Re-arms after a transmission that left packets queued: the oldest packet
/// governs the timer. Returns true when that timer has already run out
/// (fallback now).
bool rearm(MtdFugState& state, const traffic::PacketQueue& queue, Millis now,
           Millis grant_wait_ms);

/// Removes every packet with deadline < t, marked dropped.
std::vector<traffic::Packet> drop_expired(traffic::PacketQueue& queue, Millis t);

}  // namespace fastgrant::grant
