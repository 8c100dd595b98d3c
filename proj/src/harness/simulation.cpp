#include "fastgrant/harness/simulation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include "fastgrant/access/access.hpp"
#include "fastgrant/grant/fug.hpp"
#include "fastgrant/sched/qlearning.hpp"
#include "fastgrant/sim/event_queue.hpp"
#include "fastgrant/sim/rng.hpp"

namespace fastgrant::harness {

using sim::EventKind;
using traffic::AccessState;
using traffic::Packet;
using traffic::PacketSource;

std::uint64_t GroundTruth::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  };
  for (std::size_t m = 0; m < arrivals.size(); ++m) {
    mix(m);
    for (const auto& a : arrivals[m]) {
      mix(static_cast<std::uint64_t>(a.t));
      mix(static_cast<std::uint64_t>(a.size_rbs));
      mix(static_cast<std::uint64_t>(a.source));
      mix(a.origin);
    }
  }
  return h;
}

traffic::EventModel build_event_model(const SimConfig& cfg) {
  const auto& e = cfg.traffic.events;
  traffic::EventModel m;
  m.event_rate_per_ms = e.rate_per_ms;
  m.epicenter_rule = e.epicenter;
  m.disk_radius_m = e.disk_radius_m;
  m.cell_radius_m = cfg.cell.radius_m;
  m.fixed_epicenter = e.fixed_epicenter;
  m.packets_per_activation = e.packets_per_activation;
  m.size_rbs = e.size_rbs;
  switch (e.topology) {
    case Topology::kNone:
      break;
    case Topology::kChain:
      for (int i = 0; i + 1 < e.nodes; ++i) {
        m.edges.push_back({e.first_mtd + static_cast<MtdId>(i), e.first_mtd + static_cast<MtdId>(i + 1),
                           e.delay_ms, e.trigger_prob});
      }
      break;
    case Topology::kStar:
      for (int i = 1; i < e.nodes; ++i) {
        m.edges.push_back({e.first_mtd, e.first_mtd + static_cast<MtdId>(i), e.delay_ms, e.trigger_prob});
      }
      break;
    case Topology::kEdges:
      m.edges = e.edges;
      break;
  }
  if (e.topology == Topology::kChain || e.topology == Topology::kStar) {
    for (int i = 0; i < e.nodes; ++i) m.participants.push_back(e.first_mtd + static_cast<MtdId>(i));
    if (e.epicenter == traffic::EpicenterRule::kFixed) m.fixed_epicenter = e.first_mtd;
  }
  return m;
}

GroundTruth generate_ground_truth(const SimConfig& cfg, std::uint64_t seed) {
  GroundTruth gt;
  const auto n = static_cast<std::size_t>(cfg.cell.mtd_count);
  gt.positions.resize(n);
  gt.arrivals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    sim::RngStream rng(seed, "traffic/position", i);
    gt.positions[i] = traffic::sample_position(cfg.cell.radius_m, rng);
  }
  if (cfg.traffic.mode == TrafficMode::kSaturated) {
    for (std::size_t i = 0; i < n; ++i) {
      gt.arrivals[i].push_back({0, cfg.fug.grant_rbs, PacketSource::kSaturated, 0});
    }
  } else {
    const std::size_t periodic = cfg.traffic.periodic_mtds
                                     ? static_cast<std::size_t>(*cfg.traffic.periodic_mtds)
                                     : n;
    for (std::size_t i = 0; i < std::min(periodic, n); ++i) {
      for (const auto& app : cfg.traffic.apps) {
        traffic::PeriodicProfile p = app.profile;
        if (app.random_phase) {
          sim::RngStream phase(seed, fmt::format("traffic/phase/app-{}", p.app_id), i);
          p.phase_ms = phase.uniform_int(0, p.period_ms - 1);
        }
        sim::RngStream rng(seed, fmt::format("traffic/app-{}", p.app_id), i);
        for (const auto& a : traffic::gen_periodic_arrivals(p, cfg.horizon_ms, rng)) {
          gt.arrivals[i].push_back({a.t, a.size_rbs, PacketSource::kPeriodic, p.app_id});
        }
      }
    }
  }
  const auto& ev = cfg.traffic.events;
  if (ev.rate_per_ms > 0 && n > 0) {
    sim::RngStream rng(seed, "traffic/events");
    gt.episodes = traffic::gen_event_schedule(build_event_model(cfg), gt.positions, cfg.horizon_ms, rng);
    for (const auto& ep : gt.episodes) {
      for (const auto& a : ep.activations) {
        if (a.mtd >= n) continue;
        for (int k = 0; k < ev.packets_per_activation; ++k) {
          gt.arrivals[a.mtd].push_back({a.t, ev.size_rbs, PacketSource::kEvent, ep.event_id});
        }
      }
    }
  }
  for (auto& list : gt.arrivals) {
    std::stable_sort(list.begin(), list.end(), [](const PlannedArrival& a, const PlannedArrival& b) {
      if (a.t != b.t) return a.t < b.t;
      if (a.source != b.source) return a.source < b.source;
      return a.origin < b.origin;
    });
  }
  return gt;
}

namespace {

constexpr std::uint32_t kArrivalPlanned = 0;
constexpr std::uint32_t kArrivalRegen = 1;
constexpr std::uint32_t kTxRa = 0;
constexpr std::uint32_t kTxRound = 1;
constexpr std::uint32_t kCheckPacket = 0;
constexpr std::uint32_t kCheckFugTimer = 1;

constexpr int kRefreshEvery = 16;
constexpr Millis kNever = std::numeric_limits<Millis>::min() / 4;

std::string_view source_name(PacketSource s) {
  switch (s) {
    case PacketSource::kPeriodic: return "periodic";
    case PacketSource::kEvent: return "event";
    case PacketSource::kSaturated: return "saturated";
  }
  return "?";
}

struct Node {
  traffic::Mtd mtd;
  access::RaAttemptState ra;
  grant::MtdFugState fug;
  std::uint64_t session = 0;
  Millis next_attempt = -1;
  bool backlogged = false;
  Millis last_grant = kNever;
  Millis last_observed = kNever;
  MtdCounts counts;
  int unexplained = 0;
};

struct CascadeDue {
  Millis due = 0;
  Millis deadline = 0;
  int size_rbs = 1;
};

class Simulation {
 public:
  Simulation(const SimConfig& cfg, const GroundTruth& gt, std::uint64_t seed, const RunOptions& opts)
      : cfg_(cfg),
        gt_(gt),
        seed_(seed),
        opts_(opts),
        clock_(cfg.horizon_ms),
        queue_(clock_),
        rng_ra_(seed, "access/ra"),
        rng_acb_(seed, "access/acb"),
        rng_backoff_(seed, "access/backoff"),
        rng_unc_(seed, "access/uncoordinated"),
        rng_sched_(seed, "sched"),
        rng_pred_(seed, "predictor"),
        detector_(cfg.fug.predictor.detector),
        bandit_(cfg.fug.bandit),
        qtable_(cfg.fug.q) {
    report_.scheme = std::string(to_string(cfg.scheme));
    report_.seed = seed;
    if (cfg.scheme == Scheme::kFug) report_.policy = std::string(sched::to_string(cfg.fug.policy));
    periodicity_ = cfg.scheme == Scheme::kFug ? cfg.fallback_periodicity() : cfg.ra.periodicity_ms;
    const auto n = static_cast<std::size_t>(cfg.cell.mtd_count);
    nodes_.resize(n);
    std::vector<MtdId> ids(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& node = nodes_[i];
      node.mtd.id = static_cast<MtdId>(i);
      node.mtd.eab_class = static_cast<int>(i % static_cast<std::size_t>(cfg.cell.eab_classes));
      if (i < gt.positions.size()) node.mtd.position = gt.positions[i];
      node.mtd.qos = cfg.traffic.qos;
      node.counts.mtd = node.mtd.id;
      ids[i] = node.mtd.id;
    }
    if (cfg.scheme == Scheme::kSlotted) slotted_ = access::slotted_ra_assignment(ids, cfg.ra);
    next_arrival_.assign(n, 0);
    truth_cursor_.assign(n, 0);
    estimates_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      estimates_[i].mtd = static_cast<MtdId>(i);
      estimates_[i].max_delay_ms = cfg.traffic.qos.max_delay_ms;
    }
    for (const auto& ep : gt.episodes) epicenter_of_[ep.event_id] = ep.epicenter;
  }

  MetricsReport run() {
    const auto n = nodes_.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (i < gt_.arrivals.size() && !gt_.arrivals[i].empty()) {
        schedule(gt_.arrivals[i][0].t, EventKind::kPacketArrival, static_cast<MtdId>(i), kArrivalPlanned, 0);
      }
    }
    for (const auto& ep : gt_.episodes) {
      schedule(ep.onset_ms, EventKind::kEventOnset, ep.epicenter, 0, ep.event_id);
    }
    if (n > 0) {
      if (cfg_.scheme != Scheme::kUncoordinated) schedule(0, EventKind::kRaOpportunity, 0, 0, 0);
      if (cfg_.scheme == Scheme::kFug && max_budget() > 0) schedule(0, EventKind::kGrantInterval, 0, 0, 0);
    }

    while (!queue_.empty()) {
      const sim::SimEvent ev = queue_.pop();
      clock_.advance_to(ev.fire_at);
      const Millis now = ev.fire_at;
      if (now != rb_tick_) {
        rb_tick_ = now;
        used_rbs_ = 0;
      }
      switch (ev.kind) {
        case EventKind::kPacketArrival: on_arrival(ev); break;
        case EventKind::kEventOnset: on_event_onset(ev); break;
        case EventKind::kGrantInterval: on_grant_interval(now); break;
        case EventKind::kRaOpportunity: on_ra_opportunity(now); break;
        case EventKind::kTransmission:
          if (ev.tag == kTxRound) {
            on_uncoordinated_round(now);
          } else {
            on_ra_transmission(now, nodes_[ev.entity], ev.value);
          }
          break;
        case EventKind::kDeadlineCheck: on_check(ev); break;
      }
    }
    finish();
    return std::move(report_);
  }

 private:
  // --- plumbing -----------------------------------------------------------

  void schedule(Millis t, EventKind kind, MtdId entity, std::uint32_t tag, std::uint64_t value) {
    if (t >= cfg_.horizon_ms) return;
    queue_.schedule({t, kind, entity, tag, value});
  }

  bool tracing(sim::TraceLevel level) const { return opts_.trace != nullptr && opts_.trace->enabled(level); }

  void trace(Millis t, std::optional<MtdId> mtd, std::string_view kind, const std::string& detail,
             sim::TraceLevel level = sim::TraceLevel::kAccess) {
    if (tracing(level)) opts_.trace->record(t, mtd, kind, detail);
  }

  bool fallback_tick(Millis t) const { return cfg_.scheme != Scheme::kUncoordinated && t % periodicity_ == 0; }

  int data_rbs(Millis t) const {
    const auto frame = cfg_.frame();
    return frame.data_rbs(fallback_tick(t));
  }

  int free_rbs(Millis t) const { return std::max(0, data_rbs(t) - used_rbs_); }

  int max_budget() const {
    const int by_rbs = cfg_.frame().data_rbs(false) / cfg_.fug.grant_rbs;
    return cfg_.fug.budget ? std::min(*cfg_.fug.budget, by_rbs) : by_rbs;
  }

  bool measured(const Packet& p) const { return p.created_at >= cfg_.warmup_ms; }

  bool predictor_on() const {
    return cfg_.scheme == Scheme::kFug && cfg_.fug.predictor.kind == PredictorKind::kPeriodic;
  }
  bool events_on() const { return predictor_on() && cfg_.fug.predictor.events; }

  // --- packets --------------------------------------------------------------

  void on_arrival(const sim::SimEvent& ev) {
    Node& node = nodes_[ev.entity];
    const Millis now = ev.fire_at;
    Packet p;
    if (ev.tag == kArrivalRegen) {
      p = traffic::make_packet(next_packet_id_++, node.mtd.id, PacketSource::kSaturated, 0, now,
                               cfg_.fug.grant_rbs, cfg_.traffic.qos);
    } else {
      auto& idx = next_arrival_[ev.entity];
      const auto& plan = gt_.arrivals[ev.entity][idx];
      const auto& qos = plan.source == PacketSource::kEvent ? cfg_.traffic.events.qos : cfg_.traffic.qos;
      p = traffic::make_packet(next_packet_id_++, node.mtd.id, plan.source, plan.origin, now,
                               plan.size_rbs, qos);
      ++idx;
      if (idx < gt_.arrivals[ev.entity].size()) {
        schedule(gt_.arrivals[ev.entity][idx].t, EventKind::kPacketArrival, ev.entity, kArrivalPlanned, idx);
      }
    }
    if (p.source == PacketSource::kEvent && measured(p)) {
      auto it = epicenter_of_.find(p.origin);
      if (it != epicenter_of_.end() && it->second != node.mtd.id) report_.cascade_packets += 1;
    }
    node.mtd.queue.push_back(p);
    node.counts.generated += 1;
    report_.generated += 1;
    schedule(p.deadline + 1, EventKind::kDeadlineCheck, node.mtd.id, kCheckPacket, 0);
    trace(now, node.mtd.id, "packet-arrival",
          fmt::format(R"({{"packet_id":{},"source":"{}","origin":{},"size_rbs":{},"deadline_ms":{}}})", p.id,
                      source_name(p.source), p.origin, p.size_rbs, p.deadline),
          sim::TraceLevel::kFull);

    switch (cfg_.scheme) {
      case Scheme::kCoordinated:
      case Scheme::kSlotted:
        if (node.mtd.access_state == AccessState::kIdle) start_ra(node, now);
        break;
      case Scheme::kUncoordinated:
        if (!node.backlogged) {
          node.backlogged = true;
          backlog_.insert(node.mtd.id);
        }
        if (!round_pending_) {
          round_pending_ = true;
          schedule(now > last_round_ ? now : now + 1, EventKind::kTransmission, 0, kTxRound, 0);
        }
        break;
      case Scheme::kFug:
        if (node.mtd.access_state == AccessState::kIdle) {
          switch (grant::on_data_arrival(node.fug, now, cfg_.fug.grant_wait_ms)) {
            case grant::ArrivalTransition::kStartedWaiting:
              node.mtd.access_state = AccessState::kAwaitingGrant;
              schedule(node.fug.timer_expiry, EventKind::kDeadlineCheck, node.mtd.id, kCheckFugTimer,
                       node.fug.generation);
              break;
            case grant::ArrivalTransition::kFallback:
              report_.fallbacks += 1;
              start_ra(node, now);
              break;
            case grant::ArrivalTransition::kUnchanged:
              break;
          }
        }
        break;
    }
  }

  void on_event_onset(const sim::SimEvent& ev) {
    trace(ev.fire_at, ev.entity, "event-onset", fmt::format(R"({{"event_id":{}}})", ev.value),
          sim::TraceLevel::kFull);
  }

  void deliver(Node& node, Packet p, Millis now, std::string_view via) {
    p.state = traffic::PacketState::kDelivered;
    node.counts.delivered += 1;
    report_.delivered += 1;
    if (via == "grant") {
      report_.delivered_via_grant += 1;
      if (p.source == PacketSource::kEvent && measured(p)) {
        auto it = epicenter_of_.find(p.origin);
        if (it != epicenter_of_.end() && it->second != node.mtd.id) report_.cascade_via_grant += 1;
      }
    } else if (via == "ra") {
      report_.delivered_via_ra += 1;
    } else {
      report_.delivered_via_uncoordinated += 1;
    }
    if (measured(p)) {
      report_.latency.add(now - p.created_at);
      report_.measured_delivered += 1;
    }
    trace(now, node.mtd.id, "packet-delivered",
          fmt::format(R"({{"packet_id":{},"created_at_ms":{},"latency_ms":{},"via":"{}"}})", p.id, p.created_at,
                      now - p.created_at, via));
    observe(node, p, now);
    if (p.source == PacketSource::kSaturated) {
      schedule(now, EventKind::kPacketArrival, node.mtd.id, kArrivalRegen, 0);
    }
  }

  void drop(Node& node, Millis now) {
    for (const auto& p : grant::drop_expired(node.mtd.queue, now)) {
      node.counts.dropped += 1;
      report_.dropped += 1;
      if (measured(p)) report_.measured_dropped += 1;
      trace(now, node.mtd.id, "packet-dropped",
            fmt::format(R"({{"packet_id":{},"created_at_ms":{},"reason":"deadline"}})", p.id, p.created_at));
    }
  }

  void go_idle(Node& node) {
    node.session += 1;
    node.mtd.access_state = AccessState::kIdle;
    node.fug.mode = grant::FugMode::kIdle;
    node.fug.generation += 1;
    node.next_attempt = -1;
    node.ra = {};
  }

  void on_check(const sim::SimEvent& ev) {
    Node& node = nodes_[ev.entity];
    const Millis now = ev.fire_at;
    if (ev.tag == kCheckFugTimer) {
      if (grant::on_timer_expiry(node.fug, now, ev.value)) {
        report_.fallbacks += 1;
        start_ra(node, now);
      }
      return;
    }
    drop(node, now);
    if (node.mtd.queue.empty()) {
      if (node.mtd.access_state != AccessState::kIdle) go_idle(node);
    } else if (node.ra.exhausted && node.mtd.access_state == AccessState::kBackoff) {
      start_ra(node, now);
    }
  }

  // --- random access --------------------------------------------------------

  Millis first_opportunity(const Node& node, Millis t) const {
    Millis floor_t = t;
    if (last_opportunity_ >= floor_t) floor_t = last_opportunity_ + 1;
    if (cfg_.scheme == Scheme::kSlotted) {
      const auto cycle = static_cast<std::int64_t>(slotted_.cycle_length());
      const auto own = static_cast<std::int64_t>(slotted_.assignment(node.mtd.id)->first);
      std::int64_t g = (floor_t + periodicity_ - 1) / periodicity_;
      const std::int64_t r = ((g % cycle) + cycle) % cycle;
      g += ((own - r) % cycle + cycle) % cycle;
      return g * periodicity_;
    }
    return access::next_opportunity_at_or_after(floor_t, periodicity_);
  }

  void schedule_attempt(Node& node, Millis t) {
    node.next_attempt = t;
    if (t < cfg_.horizon_ms) attempts_[t].push_back(node.mtd.id);
  }

  void start_ra(Node& node, Millis now) {
    node.session += 1;
    node.ra = {};
    node.mtd.access_state = AccessState::kInRa;
    schedule_attempt(node, first_opportunity(node, now));
  }

  void retry_barred(Node& node, Millis now) {
    Millis from = now + 1;
    if (cfg_.ra.backoff_window_ms > 0) from += rng_backoff_.uniform_int(0, cfg_.ra.backoff_window_ms);
    schedule_attempt(node, first_opportunity(node, from));
  }

  void trace_attempt(Millis now, MtdId mtd, access::AccessResult result, std::optional<int> slot, int units) {
    if (!tracing(sim::TraceLevel::kAccess)) return;
    trace(now, mtd, "ra-attempt",
          fmt::format(R"({{"scheme":"{}","result":"{}","slot":{},"signaling_units":{}}})",
                      cfg_.scheme == Scheme::kSlotted ? "slotted-ra" : "ra", access::to_string(result),
                      slot ? fmt::format("{}", *slot) : std::string("null"), units));
  }

  void on_ra_opportunity(Millis now) {
    last_opportunity_ = now;
    schedule(now + periodicity_, EventKind::kRaOpportunity, 0, 0, 0);
    const auto opp_index = static_cast<std::uint64_t>(now / periodicity_);

    std::vector<MtdId> ids;
    if (auto it = attempts_.find(now); it != attempts_.end()) {
      ids = std::move(it->second);
      attempts_.erase(it);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::vector<access::Contender> contenders;
    for (MtdId id : ids) {
      const Node& node = nodes_[id];
      const auto st = node.mtd.access_state;
      if ((st == AccessState::kInRa || st == AccessState::kBackoff) && !node.ra.exhausted &&
          node.next_attempt == now && !node.mtd.queue.empty()) {
        contenders.push_back({id, node.mtd.eab_class});
      }
    }

    const auto eab = access::eab_filter(contenders, cfg_.ra.eab_barred_classes);
    for (MtdId id : eab.barred) {
      report_.eab_barred += 1;
      trace_attempt(now, id, access::AccessResult::kEabBarred, std::nullopt, 0);
      retry_barred(nodes_[id], now);
    }
    const auto acb = access::acb_filter(eab.allowed, cfg_.ra.acb_factor, rng_acb_);
    for (MtdId id : acb.barred) {
      report_.acb_barred += 1;
      trace_attempt(now, id, access::AccessResult::kAcbBarred, std::nullopt, 0);
      retry_barred(nodes_[id], now);
    }

    std::vector<access::AccessOutcome> outcomes;
    if (cfg_.scheme == Scheme::kSlotted) {
      for (MtdId id : acb.allowed) {
        outcomes.push_back({id, access::AccessResult::kSuccess, slotted_.assignment(id)->second,
                            cfg_.ra.rbs_per_slot});
      }
      const int assigned = slotted_.assigned_slots(opp_index);
      report_.wasted_ra_slots += static_cast<std::uint64_t>(std::max(0, assigned - static_cast<int>(outcomes.size())));
    } else {
      outcomes = access::ra_opportunity(acb.allowed, cfg_.ra, rng_ra_);
    }

    for (const auto& o : outcomes) {
      Node& node = nodes_[o.mtd];
      report_.ra_attempts += 1;
      report_.signaling_rb_units += static_cast<std::uint64_t>(o.signaling_rb_units);
      trace_attempt(now, o.mtd, o.result, o.slot, o.signaling_rb_units);
      if (o.result == access::AccessResult::kSuccess) {
        report_.ra_successes += 1;
        report_.handshake_messages += 3;
        node.mtd.access_state = AccessState::kConnected;
        node.next_attempt = -1;
        schedule(access::handshake_complete_time(now, cfg_.ra), EventKind::kTransmission, o.mtd, kTxRa,
                 node.session);
        if (events_on()) on_ra_request(node, now);
      } else {
        report_.ra_collisions += 1;
        if (auto next = access::backoff_schedule(node.ra, now, cfg_.ra, rng_backoff_)) {
          node.mtd.access_state = AccessState::kBackoff;
          schedule_attempt(node, *next <= last_opportunity_ ? first_opportunity(node, *next) : *next);
        } else {
          report_.ra_exhausted += 1;
          node.mtd.access_state = AccessState::kBackoff;
          node.next_attempt = -1;
        }
      }
    }
  }

  int send_queued(Node& node, Millis now, int rbs, std::string_view via) {
    int used = 0;
    while (!node.mtd.queue.empty() && node.mtd.queue.front().size_rbs <= rbs - used) {
      Packet p = node.mtd.queue.front();
      node.mtd.queue.pop_front();
      used += p.size_rbs;
      deliver(node, p, now, via);
    }
    return used;
  }

  void on_ra_transmission(Millis now, Node& node, std::uint64_t session) {
    if (session != node.session || node.mtd.access_state != AccessState::kConnected) return;
    drop(node, now);
    used_rbs_ += send_queued(node, now, free_rbs(now), "ra");
    if (node.mtd.queue.empty()) {
      go_idle(node);
    } else {
      schedule(now + 1, EventKind::kTransmission, node.mtd.id, kTxRa, node.session);
    }
  }

  // --- uncoordinated ----------------------------------------------------------

  void on_uncoordinated_round(Millis now) {
    round_pending_ = false;
    last_round_ = now;
    std::vector<MtdId> active;
    for (auto it = backlog_.begin(); it != backlog_.end();) {
      Node& node = nodes_[*it];
      drop(node, now);
      if (node.mtd.queue.empty()) {
        node.backlogged = false;
        it = backlog_.erase(it);
        continue;
      }
      if (rng_unc_.uniform() < cfg_.uncoordinated.transmit_prob) active.push_back(*it);
      ++it;
    }
    if (!active.empty()) {
      const auto results = access::uncoordinated_round(active, data_rbs(now), rng_unc_,
                                                       cfg_.uncoordinated.capture_prob);
      for (const auto& r : results) {
        Node& node = nodes_[r.mtd];
        report_.uncoordinated_transmissions += 1;
        if (!r.delivered) report_.uncoordinated_collisions += 1;
        trace(now, r.mtd, "uncoordinated-tx",
              fmt::format(R"({{"scheme":"uncoordinated","rb":{},"result":"{}","signaling_units":0}})", r.rb,
                          r.delivered ? "delivered" : "collided"));
        if (r.delivered) {
          Packet p = node.mtd.queue.front();
          node.mtd.queue.pop_front();
          deliver(node, p, now, "uncoordinated");
        }
      }
    }
    for (auto it = backlog_.begin(); it != backlog_.end();) {
      if (nodes_[*it].mtd.queue.empty()) {
        nodes_[*it].backlogged = false;
        it = backlog_.erase(it);
      } else {
        ++it;
      }
    }
    if (!backlog_.empty()) {
      round_pending_ = true;
      schedule(now + 1, EventKind::kTransmission, 0, kTxRound, 0);
    }
  }

  // --- predictor --------------------------------------------------------------

  void observe(Node& node, const Packet& p, Millis now) {
    if (!predictor_on()) return;
    predict::ObservationTag tag;
    if (p.source == PacketSource::kEvent) {
      tag = predict::kUnattributedEpisode;
      if (events_on()) {
        if (auto ep = detector_.latest_open()) {
          tag = *ep;
          detector_.note_activation(*ep, node.mtd.id, p.created_at);
          detector_.note_packet(*ep, node.mtd.id, p.size_rbs);
        }
      }
    }
    history_.observe(node.mtd.id, p.created_at, p.size_rbs, tag, now);
    node.last_observed = std::max(node.last_observed, p.created_at);
    if (!tag) {
      node.unexplained += 1;
      if (estimates_[node.mtd.id].empty() ||
          !predict::explained_by_periodic(&estimates_[node.mtd.id], p.created_at, tight_) ||
          node.unexplained >= kRefreshEvery) {
        dirty_.insert(node.mtd.id);
      }
    }
  }

  void refresh_estimates() {
    for (MtdId id : dirty_) {
      nodes_[id].unexplained = 0;
      auto est = predict::estimate_periods(history_, id, cfg_.fug.predictor.estimator);
      est.max_delay_ms = cfg_.traffic.qos.max_delay_ms;
      estimates_[id] = std::move(est);
    }
    dirty_.clear();
  }

  void close_episodes(std::vector<predict::EpisodeRecord> closed) {
    for (auto& ep : closed) {
      stats_.update_event_stats(ep);
      if (opts_.episodes != nullptr) opts_.episodes->push_back(ep);
    }
    if (!closed.empty()) scores_cache_.clear();
  }

  void on_ra_request(Node& node, Millis now) {
    close_episodes(detector_.close_expired(now));
    const auto& est = estimates_[node.mtd.id];
    auto trig = detector_.detect_event_trigger(node.mtd.id, now, est.empty() ? nullptr : &est);
    if (!trig || !trig->opened) return;
    report_.episodes_detected += 1;
    const auto& pc = cfg_.fug.predictor;
    std::span<const predict::PairScore> scores;
    if (pc.score_policy != predict::ScorePolicy::kCoactivation) {
      auto it = scores_cache_.find(node.mtd.id);
      if (it == scores_cache_.end()) {
        it = scores_cache_.emplace(node.mtd.id, predict::causality_scores(stats_, node.mtd.id, pc.causality,
                                                                          rng_pred_)).first;
      }
      scores = it->second;
    }
    const auto cascade =
        predict::predict_event_cascade(stats_, node.mtd.id, pc.p_threshold, pc.score_policy, scores, pc.smoothing);
    const Millis w = cfg_.fug.grant_wait_ms;
    const Millis latest_activation = now - w - (w > 0 ? 1 : 0);
    for (const auto& c : cascade) {
      if (c.mtd >= nodes_.size()) continue;
      const Millis due = latest_activation + c.eta_ms;
      auto [it, fresh] = cascade_due_.try_emplace(c.mtd, CascadeDue{due, due + cfg_.traffic.events.qos.max_delay_ms,
                                                                      c.expected_size_rbs});
      if (!fresh && due < it->second.due) it->second = {due, due + cfg_.traffic.events.qos.max_delay_ms,
                                                        c.expected_size_rbs};
    }
  }

  // Ground-truth active set over [t, t + lookahead).
  bool truly_active(MtdId id, Millis t, Millis lookahead) {
    if (id >= gt_.arrivals.size()) return false;
    const auto& list = gt_.arrivals[id];
    auto& cur = truth_cursor_[id];
    while (cur < list.size() && list[cur].t < t) ++cur;
    return cur < list.size() && list[cur].t < t + lookahead;
  }

  void measure_prediction(Millis now) {
    const Millis L = cfg_.fug.predictor.lookahead_ms;
    QualityTick q;
    q.t = now;
    std::vector<char> predicted(nodes_.size(), 0);
    if (cfg_.fug.predictor.kind == PredictorKind::kOracle) {
      for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (truly_active(static_cast<MtdId>(i), now, L)) predicted[i] = 1;
      }
    } else {
      const auto pred = predict::predict_periodic_active(estimates_, now, L, cfg_.fug.predictor.confidence_threshold);
      for (const auto& a : pred.predicted_active) predicted[a.mtd] = 1;
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const bool actual = truly_active(static_cast<MtdId>(i), now, L);
      q.predicted += predicted[i] ? 1u : 0u;
      q.actual += actual ? 1u : 0u;
      q.hits += (actual && predicted[i]) ? 1u : 0u;
    }
    report_.predicted_total += q.predicted;
    report_.actual_total += q.actual;
    report_.true_positives += q.hits;
    if (opts_.quality != nullptr) opts_.quality->push_back(q);
  }

  // --- fast uplink grant ----------------------------------------------------------

  sched::AvailabilitySet availability(Millis now) {
    sched::AvailabilitySet avail;
    avail.round = bandit_.round() + 1;
    std::map<MtdId, sched::ArmInfo> arms;
    auto add = [&](MtdId id, Millis urgency, int size) {
      auto [it, fresh] = arms.try_emplace(id, sched::ArmInfo{id, urgency, size});
      if (!fresh) {
        it->second.urgency_ms = std::min(it->second.urgency_ms, urgency);
        it->second.expected_size_rbs = std::max(it->second.expected_size_rbs, size);
      }
    };
    const auto& pc = cfg_.fug.predictor;
    if (pc.kind == PredictorKind::kOracle) {
      for (const auto& node : nodes_) {
        if (node.mtd.queue.empty()) continue;
        int size = 0;
        for (const auto& p : node.mtd.queue) size += p.size_rbs;
        add(node.mtd.id, node.mtd.queue.front().deadline - now, size);
      }
    } else if (pc.kind == PredictorKind::kPeriodic) {
      for (const auto& est : estimates_) {
        const Node& node = nodes_[est.mtd];
        const Millis served = std::max(node.last_grant, node.last_observed);
        for (const auto& c : est.components) {
          if (c.confidence < pc.confidence_threshold) continue;
          const Millis n = c.next_nominal_at_or_after(served + 1 + c.margin_ms);
          if (n + c.margin_ms > now) continue;
          add(est.mtd, n - c.margin_ms + est.max_delay_ms - now, c.size_rbs);
        }
      }
      for (const auto& [id, due] : cascade_due_) {
        if (due.due <= now) add(id, due.deadline - now, due.size_rbs);
      }
    }
    for (const auto& [id, arm] : arms) avail.arms.push_back(arm);
    return avail;
  }

  void on_grant_interval(Millis now) {
    const std::uint64_t interval_id = report_.grant_intervals;
    report_.grant_intervals += 1;
    report_.broadcast_messages += grant::GrantBroadcast::kSignalingMessages;
    schedule(now + cfg_.fug.grant_interval_ms, EventKind::kGrantInterval, 0, 0, 0);

    if (events_on()) close_episodes(detector_.close_expired(now));
    if (predictor_on()) refresh_estimates();
    if (cfg_.fug.predictor.kind != PredictorKind::kNone && now >= cfg_.warmup_ms) measure_prediction(now);

    const auto avail = availability(now);
    const int budget = std::min(max_budget(), free_rbs(now) / cfg_.fug.grant_rbs);
    sched::TrueMeans truth;
    for (const auto& a : avail.arms) {
      const auto& q = nodes_[a.mtd].mtd.queue;
      double v = 0.0;
      if (!q.empty()) v = cfg_.fug.reward == sched::RewardKind::kValueWeighted ? q.front().value : 1.0;
      truth[a.mtd] = v;
    }
    sched::SelectContext ctx;
    ctx.true_means = &truth;
    ctx.qtable = &qtable_;
    const int qstate = sched::encode_state(avail);
    const auto chosen = sched::select_grants(avail, budget, cfg_.fug.policy, bandit_, rng_sched_, &ctx);

    grant::GrantBroadcast bc;
    bc.interval_id = interval_id;
    bc.issued_at = now;
    int next_rb = used_rbs_;
    const int limit = data_rbs(now);
    for (MtdId id : chosen) {
      const auto arm = std::find_if(avail.arms.begin(), avail.arms.end(),
                                    [&](const sched::ArmInfo& a) { return a.mtd == id; });
      const int want = std::max(cfg_.fug.grant_rbs, arm->expected_size_rbs);
      const int rbs = std::min(want, limit - next_rb);
      if (rbs < 1) break;
      bc.grants.push_back({id, rbs, now, interval_id, next_rb});
      next_rb += rbs;
    }
    if (!bc.valid(limit)) report_.grant_overlaps += 1;
    used_rbs_ = next_rb;

    int wasted = 0;
    double round_reward = 0.0;
    for (const auto& g : bc.grants) {
      Node& node = nodes_[g.mtd];
      drop(node, now);
      auto out = grant::on_grant(node.fug, node.mtd.queue, g, now);
      report_.grants += 1;
      report_.grant_rb_units += static_cast<std::uint64_t>(g.rb_allocation);
      node.last_grant = now;
      cascade_due_.erase(g.mtd);
      sched::GrantResult result;
      if (out.wasted()) {
        ++wasted;
        report_.wasted_grants += 1;
        report_.wasted_grant_rb_units += static_cast<std::uint64_t>(out.wasted_rbs);
      } else if (!out.delivered.empty()) {
        result.delivered_on_time = true;
        result.packet_value = out.delivered.front().value;
      }
      for (auto& p : out.delivered) deliver(node, p, now, "grant");
      if (node.mtd.queue.empty()) {
        go_idle(node);
      }
      trace(now, g.mtd, "grant",
            fmt::format(R"({{"interval_id":{},"first_rb":{},"rb_allocation":{},"wasted":{}}})", interval_id,
                        g.first_rb, g.rb_allocation, out.wasted() ? "true" : "false"));
      const double r = sched::reward(result, cfg_.fug.reward);
      round_reward += r;
      bandit_.update(g.mtd, r);
    }
    if (!bc.grants.empty()) {
      trace(now, std::nullopt, "grant-broadcast",
            fmt::format(R"({{"interval_id":{},"grants":{},"wasted":{}}})", interval_id, bc.grants.size(), wasted));
    }

    if (cfg_.fug.policy == sched::Policy::kQLearning) {
      if (qtable_.last_state >= 0) qtable_.q_step(qtable_.last_state, qtable_.last_action, pending_q_reward_, qstate);
      qtable_.last_state = qstate;
      qtable_.last_action = ctx.last_q_action >= 0 ? ctx.last_q_action : 0;
      pending_q_reward_ = chosen.empty() ? 0.0 : round_reward / static_cast<double>(chosen.size());
    }
    if (!avail.arms.empty()) {
      sched::RegretTrace& rt = opts_.regret != nullptr ? *opts_.regret : scratch_regret_;
      sched::regret_update(rt, bandit_.round(), avail, chosen, budget, truth);
      if (opts_.regret == nullptr && rt.rows.size() > 1) rt.rows.erase(rt.rows.begin());
      cumulative_regret_ = rt.cumulative();
      report_.regret_rounds += 1;
    }
  }

  // --- wrap-up ----------------------------------------------------------------

  void finish() {
    const Millis end = cfg_.horizon_ms;
    for (auto& node : nodes_) {
      for (auto& p : node.mtd.queue) {
        p.state = traffic::PacketState::kResidual;
        node.counts.residual += 1;
        report_.residual += 1;
        trace(end, node.mtd.id, "packet-residual",
              fmt::format(R"({{"packet_id":{},"created_at_ms":{}}})", p.id, p.created_at));
      }
      report_.per_mtd.push_back(node.counts);
    }
    if (events_on()) close_episodes(detector_.close_all());

    auto ratio = [](std::uint64_t a, std::uint64_t b) -> std::optional<double> {
      if (b == 0) return std::nullopt;
      return static_cast<double>(a) / static_cast<double>(b);
    };
    switch (cfg_.scheme) {
      case Scheme::kCoordinated:
      case Scheme::kSlotted:
        report_.collision_count = report_.ra_collisions;
        report_.collision_probability = ratio(report_.ra_collisions, report_.ra_attempts);
        break;
      case Scheme::kUncoordinated:
        report_.collision_count = report_.uncoordinated_collisions;
        report_.collision_probability =
            ratio(report_.uncoordinated_collisions, report_.uncoordinated_transmissions);
        break;
      case Scheme::kFug:
        report_.collision_count = report_.grant_overlaps;
        report_.collision_probability = ratio(report_.grant_overlaps, report_.grants);
        break;
    }
    report_.deadline_miss_rate =
        ratio(report_.measured_dropped, report_.measured_delivered + report_.measured_dropped);
    report_.waste_fraction = ratio(report_.wasted_grant_rb_units, report_.grant_rb_units);
    if (cfg_.scheme == Scheme::kFug && cfg_.fug.predictor.kind != PredictorKind::kNone) {
      report_.precision = ratio(report_.true_positives, report_.predicted_total);
      report_.recall = ratio(report_.true_positives, report_.actual_total);
    }
    if (cfg_.scheme == Scheme::kFug && report_.regret_rounds > 0) report_.cumulative_regret = cumulative_regret_;
    if (opts_.trace != nullptr) {
      report_.trace_records = opts_.trace->records();
      report_.trace_digest = fmt::format("{:016x}", opts_.trace->digest());
    }
    if (opts_.estimates != nullptr) {
      if (predictor_on()) refresh_estimates();
      *opts_.estimates = estimates_;
    }
    if (opts_.causal_stats != nullptr) *opts_.causal_stats = stats_;
  }

  const SimConfig& cfg_;
  const GroundTruth& gt_;
  std::uint64_t seed_;
  RunOptions opts_;
  sim::SimClock clock_;
  sim::EventQueue queue_;
  sim::RngStream rng_ra_, rng_acb_, rng_backoff_, rng_unc_, rng_sched_, rng_pred_;
  Millis periodicity_ = 5;

  std::vector<Node> nodes_;
  std::vector<std::size_t> next_arrival_;
  std::vector<std::size_t> truth_cursor_;
  std::map<Millis, std::vector<MtdId>> attempts_;
  Millis last_opportunity_ = -1;
  access::SlottedAssignment slotted_;
  std::set<MtdId> backlog_;
  bool round_pending_ = false;
  Millis last_round_ = -1;
  Millis rb_tick_ = -1;
  int used_rbs_ = 0;
  std::uint64_t next_packet_id_ = 0;
  std::map<std::uint32_t, MtdId> epicenter_of_;

  predict::TxHistory history_;
  std::vector<predict::PeriodicEstimate> estimates_;
  std::set<MtdId> dirty_;
  predict::EventDetectorConfig tight_{0, 0, 0.0, 0};
  predict::EventDetector detector_;
  predict::CausalStats stats_;
  std::map<MtdId, std::vector<predict::PairScore>> scores_cache_;
  std::map<MtdId, CascadeDue> cascade_due_;

  sched::BanditState bandit_;
  sched::QTable qtable_;
  double pending_q_reward_ = 0.0;
  sched::RegretTrace scratch_regret_;
  double cumulative_regret_ = 0.0;

  MetricsReport report_;
};

}  // namespace

MetricsReport run(const SimConfig& cfg, const GroundTruth& truth, std::uint64_t seed, const RunOptions& opts) {
  Simulation sim(cfg, truth, seed, opts);
  return sim.run();
}

MetricsReport run(const SimConfig& cfg, std::uint64_t seed, const RunOptions& opts) {
  const GroundTruth gt = generate_ground_truth(cfg, seed);
  return run(cfg, gt, seed, opts);
}

}  // namespace fastgrant::harness
