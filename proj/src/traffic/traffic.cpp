#include "fastgrant/traffic/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>

namespace fastgrant::traffic {

void QosSpec::validate() const {
  if (max_delay_ms < 1) throw std::invalid_argument("qos.max_delay_ms must be >= 1");
  if (!(packet_value > 0.0)) throw std::invalid_argument("qos.packet_value must be > 0");
}

void PeriodicProfile::validate() const {
  if (period_ms < 1) throw std::invalid_argument("period_ms must be >= 1");
  if (phase_ms < 0 || phase_ms >= period_ms) {
    throw std::invalid_argument("phase_ms must lie in [0, period_ms)");
  }
  if (jitter_ms < 0 || 2 * jitter_ms >= period_ms) {
    throw std::invalid_argument("jitter_ms must be >= 0 and < period_ms/2");
  }
  if (size_rbs < 1) throw std::invalid_argument("size_rbs must be >= 1");
  if (mode == ArrivalMode::kNhpp) {
    if (rate_profile.empty()) throw std::invalid_argument("nhpp mode needs a rate_profile");
    for (double r : rate_profile) {
      if (!(r >= 0.0) || !std::isfinite(r)) {
        throw std::invalid_argument("rate_profile entries must be finite and >= 0");
      }
    }
  }
}

double PeriodicProfile::rate_at(double t_ms) const {
  if (rate_profile.empty()) return 0.0;
  const double period = static_cast<double>(period_ms);
  double offset = std::fmod(t_ms - static_cast<double>(phase_ms), period);
  if (offset < 0) offset += period;
  const auto n = rate_profile.size();
  auto idx = static_cast<std::size_t>(offset / period * static_cast<double>(n));
  return rate_profile[std::min(idx, n - 1)];
}

double PeriodicProfile::rate_max() const {
  if (rate_profile.empty()) return 0.0;
  return *std::max_element(rate_profile.begin(), rate_profile.end());
}

std::vector<double> sample_nhpp(const std::function<double(double)>& rate_fn,
                                double rate_max, Millis horizon_ms,
                                sim::RngStream& rng) {
  if (rate_max == 0.0) return {};
  if (!(rate_max > 0.0) || !std::isfinite(rate_max)) {
    throw std::invalid_argument("sample_nhpp: rate_max must be positive");
  }
  std::vector<double> out;
  const double horizon = static_cast<double>(horizon_ms);
  double t = 0.0;
  while (true) {
    t += rng.exponential(rate_max);
    if (t >= horizon) break;
    const double rate = rate_fn(t);
    if (rate > rate_max * (1.0 + 1e-12)) {
      throw std::domain_error("sample_nhpp: rate " + std::to_string(rate) +
                              " exceeds envelope " + std::to_string(rate_max) +
                              " at t=" + std::to_string(t));
    }
    if (rate < 0.0) throw std::domain_error("sample_nhpp: negative rate");
    if (rng.uniform() * rate_max < rate) out.push_back(t);
  }
  return out;
}

std::vector<Arrival> gen_periodic_arrivals(const PeriodicProfile& profile,
                                           Millis horizon_ms,
                                           sim::RngStream& rng) {
  profile.validate();
  std::vector<Arrival> out;
  if (profile.mode == ArrivalMode::kNhpp) {
    const double peak = profile.rate_max();
    if (peak <= 0.0) return out;
    const auto times = sample_nhpp(
        [&profile](double t) { return profile.rate_at(t); }, peak, horizon_ms,
        rng);
    out.reserve(times.size());
    for (double t : times) {
      out.push_back({static_cast<Millis>(std::floor(t)), profile.size_rbs});
    }
    return out;
  }
  for (Millis nominal = profile.phase_ms; nominal - profile.jitter_ms < horizon_ms;
       nominal += profile.period_ms) {
    Millis t = nominal;
    if (profile.jitter_ms > 0) {
      t += rng.uniform_int(-profile.jitter_ms, profile.jitter_ms);
    }
    if (t >= 0 && t < horizon_ms) out.push_back({t, profile.size_rbs});
  }
  // jitter < period/2 keeps the train ordered; sort anyway for safety of the
  // t < 0 clipping at the start.
  std::sort(out.begin(), out.end(),
            [](const Arrival& a, const Arrival& b) { return a.t < b.t; });
  return out;
}

void EventModel::validate() const {
  if (!(event_rate_per_ms >= 0.0) || !std::isfinite(event_rate_per_ms)) {
    throw std::invalid_argument("event_rate_per_ms must be >= 0");
  }
  for (const auto& e : edges) {
    if (e.delay_ms < 1) {
      throw std::invalid_argument("propagation delay_ms must be >= 1");
    }
    if (!(e.trigger_prob >= 0.0 && e.trigger_prob <= 1.0)) {
      throw std::invalid_argument("trigger_prob must lie in [0,1]");
    }
  }
  if (packets_per_activation < 1) {
    throw std::invalid_argument("packets_per_activation must be >= 1");
  }
  if (size_rbs < 1) throw std::invalid_argument("event size_rbs must be >= 1");
  if (epicenter_rule == EpicenterRule::kSpatialDisk && !(disk_radius_m > 0.0)) {
    throw std::invalid_argument("disk_radius_m must be > 0");
  }
}

std::vector<Activation> propagate_event(const EventModel& model,
                                        MtdId epicenter, Millis onset,
                                        sim::RngStream& rng) {
  std::unordered_map<MtdId, std::vector<const PropagationEdge*>> out_edges;
  for (const auto& e : model.edges) out_edges[e.from].push_back(&e);

  using Item = std::tuple<Millis, MtdId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> frontier;
  std::unordered_map<MtdId, Millis> best;
  std::vector<Activation> settled;

  frontier.emplace(onset, epicenter);
  best[epicenter] = onset;
  std::unordered_map<MtdId, bool> done;
  while (!frontier.empty()) {
    auto [t, node] = frontier.top();
    frontier.pop();
    if (done[node] || best[node] != t) continue;
    done[node] = true;
    settled.push_back({node, t});
    auto it = out_edges.find(node);
    if (it == out_edges.end()) continue;
    for (const PropagationEdge* e : it->second) {
      if (!rng.bernoulli(e->trigger_prob)) continue;
      const Millis ta = t + e->delay_ms;
      auto b = best.find(e->to);
      if (b == best.end() || ta < b->second) {
        best[e->to] = ta;
        frontier.emplace(ta, e->to);
      }
    }
  }
  std::sort(settled.begin(), settled.end(), [](const Activation& a, const Activation& b) {
    return std::tie(a.t, a.mtd) < std::tie(b.t, b.mtd);
  });
  return settled;
}

namespace {

std::optional<MtdId> pick_epicenter(const EventModel& model,
                                    std::span<const Position> positions,
                                    sim::RngStream& rng) {
  std::vector<MtdId> pool = model.participants;
  if (pool.empty()) {
    pool.resize(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) pool[i] = static_cast<MtdId>(i);
  }
  switch (model.epicenter_rule) {
    case EpicenterRule::kFixed:
      return model.fixed_epicenter;
    case EpicenterRule::kUniformRandomMtd:
      if (pool.empty()) return std::nullopt;
      return pool[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
    case EpicenterRule::kSpatialDisk: {
      const Position p = sample_position(model.cell_radius_m, rng);
      std::optional<MtdId> nearest;
      double best = model.disk_radius_m;
      for (MtdId id : pool) {
        if (id >= positions.size()) continue;
        const double d = std::hypot(positions[id].x - p.x, positions[id].y - p.y);
        if (d <= best) {
          best = d;
          nearest = id;
        }
      }
      return nearest;
    }
  }
  return std::nullopt;
}

}  // namespace

std::vector<EventEpisode> gen_event_schedule(const EventModel& model,
                                             std::span<const Position> positions,
                                             Millis horizon_ms,
                                             sim::RngStream& rng) {
  model.validate();
  std::vector<EventEpisode> episodes;
  if (model.event_rate_per_ms <= 0.0) return episodes;
  double t = 0.0;
  std::uint32_t next_id = 0;
  while (true) {
    t += rng.exponential(model.event_rate_per_ms);
    if (t >= static_cast<double>(horizon_ms)) break;
    const auto onset = static_cast<Millis>(std::floor(t));
    const auto epicenter = pick_epicenter(model, positions, rng);
    EventEpisode ep;
    ep.event_id = next_id++;
    ep.onset_ms = onset;
    if (epicenter) {
      ep.epicenter = *epicenter;
      for (const auto& a : propagate_event(model, *epicenter, onset, rng)) {
        if (a.t < horizon_ms) ep.activations.push_back(a);
      }
    }
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

Packet make_packet(std::uint64_t id, MtdId mtd, PacketSource source,
                   std::uint32_t origin, Millis created_at, int size_rbs,
                   const QosSpec& qos) {
  Packet p;
  p.id = id;
  p.mtd = mtd;
  p.source = source;
  p.origin = origin;
  p.created_at = created_at;
  p.size_rbs = size_rbs;
  p.deadline = created_at + qos.max_delay_ms;
  p.value = qos.packet_value;
  return p;
}

Position sample_position(double radius_m, sim::RngStream& rng) {
  const double r = radius_m * std::sqrt(rng.uniform());
  const double theta = 2.0 * M_PI * rng.uniform();
  return {r * std::cos(theta), r * std::sin(theta)};
}

}  // namespace fastgrant::traffic
