#include "fastgrant/grant/fug.hpp"

#include <algorithm>

namespace fastgrant::grant {

std::string_view to_string(FugMode m) {
  switch (m) {
    case FugMode::kIdle: return "idle";
    case FugMode::kAwaitingGrant: return "awaiting-grant";
    case FugMode::kRaFallback: return "ra-fallback";
  }
  return "?";
}

int GrantBroadcast::total_rbs() const {
  int n = 0;
  for (const auto& g : grants) n += g.rb_allocation;
  return n;
}

bool GrantBroadcast::valid(int data_rbs) const {
  std::vector<std::pair<int, int>> spans;
  for (const auto& g : grants) {
    if (g.rb_allocation < 1 || g.first_rb < 0 || g.first_rb + g.rb_allocation > data_rbs) return false;
    spans.emplace_back(g.first_rb, g.first_rb + g.rb_allocation);
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].first < spans[i - 1].second) return false;
  }
  return true;
}

ArrivalTransition on_data_arrival(MtdFugState& state, Millis t, Millis grant_wait_ms) {
  if (state.mode != FugMode::kIdle) return ArrivalTransition::kUnchanged;
  ++state.generation;
  if (grant_wait_ms <= 0) {
    state.mode = FugMode::kRaFallback;
    state.timer_expiry = t;
    return ArrivalTransition::kFallback;
  }
  state.mode = FugMode::kAwaitingGrant;
  state.timer_expiry = t + grant_wait_ms;
  return ArrivalTransition::kStartedWaiting;
}

GrantOutcome on_grant(MtdFugState& state, traffic::PacketQueue& queue, const Grant& grant,
                      Millis /*t*/) {
  GrantOutcome out;
  if (queue.empty()) {
    out.wasted_rbs = grant.rb_allocation;
    return out;
  }
  int left = grant.rb_allocation;
  while (!queue.empty() && queue.front().size_rbs <= left) {
    traffic::Packet p = queue.front();
    queue.pop_front();
    left -= p.size_rbs;
    p.state = traffic::PacketState::kDelivered;
    out.delivered.push_back(p);
  }
  out.used_rbs = grant.rb_allocation - left;
  if (queue.empty()) {
    state.mode = FugMode::kIdle;
    ++state.generation;
  }
  return out;
}

bool on_timer_expiry(MtdFugState& state, Millis t, std::uint64_t generation) {
  if (state.mode != FugMode::kAwaitingGrant || generation != state.generation ||
      t < state.timer_expiry) {
    return false;
  }
  state.mode = FugMode::kRaFallback;
  return true;
}

bool rearm(MtdFugState& state, const traffic::PacketQueue& queue, Millis now,
           Millis grant_wait_ms) {
  ++state.generation;
  if (queue.empty()) {
    state.mode = FugMode::kIdle;
    return false;
  }
  const Millis expiry = queue.front().created_at + grant_wait_ms;
  if (grant_wait_ms <= 0 || expiry <= now) {
    state.mode = FugMode::kRaFallback;
    state.timer_expiry = now;
    return true;
  }
  state.mode = FugMode::kAwaitingGrant;
  state.timer_expiry = expiry;
  return false;
}

std::vector<traffic::Packet> drop_expired(traffic::PacketQueue& queue, Millis t) {
  std::vector<traffic::Packet> dropped;
  for (auto it = queue.begin(); it != queue.end();) {
    if (it->deadline < t) {
      it->state = traffic::PacketState::kDroppedDeadline;
      dropped.push_back(*it);
      it = queue.erase(it);
    } else {
      ++it;
    }
  }
  return dropped;
}

}  // namespace fastgrant::grant
