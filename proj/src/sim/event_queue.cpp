#include "fastgrant/sim/event_queue.hpp"

#include <stdexcept>
#include <string>
#include <tuple>

namespace fastgrant::sim {

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::kPacketArrival: return "packet-arrival";
    case EventKind::kEventOnset: return "event-onset";
    case EventKind::kGrantInterval: return "grant-interval";
    case EventKind::kRaOpportunity: return "ra-opportunity";
    case EventKind::kTransmission: return "transmission-complete";
    case EventKind::kDeadlineCheck: return "deadline-check";
  }
  return "unknown";
}

SimClock::SimClock(Millis horizon) : horizon_(horizon) {
  if (horizon < 0) throw std::invalid_argument("horizon must be non-negative");
}

void SimClock::advance_to(Millis t) {
  if (t < now_) {
    throw std::logic_error("clock moved backwards: " + std::to_string(t) +
                           " < " + std::to_string(now_));
  }
  if (t > horizon_) throw std::logic_error("clock advanced past horizon");
  now_ = t;
}

bool EventQueue::Later::operator()(const Entry& a, const Entry& b) const {
  return std::make_tuple(a.event.fire_at, kind_rank(a.event.kind),
                         a.event.entity, a.seq) >
         std::make_tuple(b.event.fire_at, kind_rank(b.event.kind),
                         b.event.entity, b.seq);
}

void EventQueue::schedule(const SimEvent& event) {
  if (event.fire_at < clock_->now()) {
    throw std::logic_error("event scheduled in the past: " +
                           std::string(to_string(event.kind)) + " at " +
                           std::to_string(event.fire_at) + ", now " +
                           std::to_string(clock_->now()));
  }
  heap_.push(Entry{event, next_seq_++});
}

SimEvent EventQueue::pop() {
  SimEvent e = heap_.top().event;
  heap_.pop();
  return e;
}

}  // namespace fastgrant::sim
