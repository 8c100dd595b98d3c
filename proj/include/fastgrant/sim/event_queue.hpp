#pragma once

#include <cstdint>
#include <queue>
#include <string_view>
#include <vector>

#include "fastgrant/sim/types.hpp"

namespace fastgrant::sim {

/// Event kinds, declared in same-tick processing order.
///
/// Arrivals come first so that a packet created at t is visible to grant
/// decisions and RA opportunities at t. Grant decisions precede deadline
/// checks, so a grant landing on the grant-wait expiry tick wins.
enum class EventKind : std::uint8_t {
  kPacketArrival = 0,
  kEventOnset = 1,
  kGrantInterval = 2,
  kRaOpportunity = 3,
  kTransmission = 4,
  kDeadlineCheck = 5,
};

constexpr int kind_rank(EventKind k) { return static_cast<int>(k); }

std::string_view to_string(EventKind k);

struct SimEvent {
  Millis fire_at = 0;
  EventKind kind = EventKind::kPacketArrival;
  std::uint32_t entity = 0;
  /// Kind-specific payload: a sub-type tag and one value (generation counter,
  /// episode id, ...).
  std::uint32_t tag = 0;
  std::uint64_t value = 0;
};

class SimClock {
 public:
  explicit SimClock(Millis horizon);

  Millis now() const { return now_; }
  Millis horizon() const { return horizon_; }

  /// Moves the clock forward; throws std::logic_error if t is in the past or
  /// beyond the horizon.
  void advance_to(Millis t);

 private:
  Millis now_ = 0;
  Millis horizon_;
};

/// Deterministic priority queue: (fire_at, kind rank, entity, insertion order).
class EventQueue {
 public:
  explicit EventQueue(const SimClock& clock) : clock_(&clock) {}

  /// Throws std::logic_error when event.fire_at < clock.now().
  void schedule(const SimEvent& event);

  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }
  const SimEvent& top() const { return heap_.top().event; }
  SimEvent pop();

 private:
  struct Entry {
    SimEvent event;
    std::uint64_t seq;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const;
  };

  const SimClock* clock_;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
};

}  // namespace fastgrant::sim
