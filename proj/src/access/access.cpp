#include "fastgrant/access/access.hpp"

#include <algorithm>
#include <stdexcept>

namespace fastgrant::access {

std::string_view to_string(AccessResult r) {
  switch (r) {
    case AccessResult::kSuccess: return "success";
    case AccessResult::kCollidedBarred: return "collided-barred";
    case AccessResult::kAcbBarred: return "acb-barred";
    case AccessResult::kEabBarred: return "eab-barred";
    case AccessResult::kBackoff: return "backoff";
  }
  return "unknown";
}

FilterResult acb_filter(std::span<const MtdId> contenders, double acb_factor,
                        sim::RngStream& rng) {
  if (!(acb_factor >= 0.0 && acb_factor <= 1.0)) {
    throw std::invalid_argument("acb_factor must lie in [0,1]");
  }
  FilterResult out;
  for (MtdId m : contenders) {
    (rng.uniform() < acb_factor ? out.allowed : out.barred).push_back(m);
  }
  return out;
}

FilterResult eab_filter(std::span<const Contender> contenders,
                        const std::set<int>& barred_classes) {
  FilterResult out;
  for (const auto& c : contenders) {
    (barred_classes.contains(c.eab_class) ? out.barred : out.allowed).push_back(c.mtd);
  }
  return out;
}

namespace {

// Resolves one set of occupants sharing a resource; returns the index of the
// winner inside `occupants`, if any.
std::optional<std::size_t> resolve(std::size_t occupants, double capture_prob,
                                   sim::RngStream& rng) {
  if (occupants == 1) return 0;
  if (capture_prob > 0.0 && rng.bernoulli(capture_prob)) {
    return static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(occupants) - 1));
  }
  return std::nullopt;
}

}  // namespace

std::vector<AccessOutcome> ra_opportunity(std::span<const MtdId> contenders,
                                          const RaConfig& cfg,
                                          sim::RngStream& rng) {
  std::vector<AccessOutcome> out;
  if (contenders.empty()) return out;
  if (cfg.slots_per_opportunity < 1) throw std::invalid_argument("no RA slots");
  out.reserve(contenders.size());
  std::vector<std::vector<std::size_t>> by_slot(
      static_cast<std::size_t>(cfg.slots_per_opportunity));
  for (std::size_t i = 0; i < contenders.size(); ++i) {
    const int slot = static_cast<int>(rng.uniform_int(0, cfg.slots_per_opportunity - 1));
    out.push_back({contenders[i], AccessResult::kCollidedBarred, slot, cfg.rbs_per_slot});
    by_slot[static_cast<std::size_t>(slot)].push_back(i);
  }
  for (const auto& occupants : by_slot) {
    if (occupants.empty()) continue;
    if (auto w = resolve(occupants.size(), cfg.capture_prob, rng)) {
      out[occupants[*w]].result = AccessResult::kSuccess;
    }
  }
  return out;
}

Millis handshake_complete_time(Millis success_at, const RaConfig& cfg) {
  return success_at + cfg.handshake.msg2 + cfg.handshake.msg3 + cfg.handshake.msg4;
}

Millis next_opportunity_at_or_after(Millis t, Millis periodicity_ms) {
  if (periodicity_ms < 1) throw std::invalid_argument("periodicity must be >= 1");
  if (t <= 0) return 0;
  return ((t + periodicity_ms - 1) / periodicity_ms) * periodicity_ms;
}

std::optional<Millis> backoff_schedule(RaAttemptState& state, Millis now,
                                       const RaConfig& cfg, sim::RngStream& rng) {
  ++state.attempts;
  if (state.attempts >= cfg.max_attempts) {
    state.exhausted = true;
    return std::nullopt;
  }
  const Millis u = cfg.backoff_window_ms > 0 ? rng.uniform_int(0, cfg.backoff_window_ms) : 0;
  const Millis target = std::max(now + u, now + 1);
  state.next_attempt = next_opportunity_at_or_after(target, cfg.periodicity_ms);
  return state.next_attempt;
}

SlottedAssignment::SlottedAssignment(std::span<const MtdId> mtds, const RaConfig& cfg) {
  const auto k = static_cast<std::size_t>(cfg.slots_per_opportunity);
  if (k == 0) throw std::invalid_argument("no RA slots");
  std::vector<MtdId> ids(mtds.begin(), mtds.end());
  std::sort(ids.begin(), ids.end());
  cycle_ = (ids.size() + k - 1) / k;
  per_opportunity_.assign(cycle_, 0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    slots_[ids[i]] = {i / k, static_cast<int>(i % k)};
    ++per_opportunity_[i / k];
  }
}

std::optional<std::pair<std::size_t, int>> SlottedAssignment::assignment(MtdId mtd) const {
  auto it = slots_.find(mtd);
  if (it == slots_.end()) return std::nullopt;
  return it->second;
}

bool SlottedAssignment::owns(MtdId mtd, std::uint64_t opportunity_index) const {
  auto it = slots_.find(mtd);
  return it != slots_.end() && cycle_ > 0 && opportunity_index % cycle_ == it->second.first;
}

int SlottedAssignment::assigned_slots(std::uint64_t opportunity_index) const {
  if (cycle_ == 0) return 0;
  return per_opportunity_[opportunity_index % cycle_];
}

SlottedAssignment slotted_ra_assignment(std::span<const MtdId> mtds, const RaConfig& cfg) {
  return SlottedAssignment(mtds, cfg);
}

std::vector<UncoordinatedResult> uncoordinated_round(std::span<const MtdId> active,
                                                     int data_rbs,
                                                     sim::RngStream& rng,
                                                     double capture_prob) {
  if (data_rbs < 1) throw std::invalid_argument("uncoordinated_round: data_rbs must be >= 1");
  std::vector<UncoordinatedResult> out;
  out.reserve(active.size());
  std::map<int, std::vector<std::size_t>> by_rb;
  for (std::size_t i = 0; i < active.size(); ++i) {
    const int rb = static_cast<int>(rng.uniform_int(0, data_rbs - 1));
    out.push_back({active[i], rb, false});
    by_rb[rb].push_back(i);
  }
  for (const auto& [rb, occupants] : by_rb) {
    if (auto w = resolve(occupants.size(), capture_prob, rng)) {
      out[occupants[*w]].delivered = true;
    }
  }
  return out;
}

}  // namespace fastgrant::access
