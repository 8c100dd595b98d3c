#include "fastgrant/harness/config.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <set>

#include "json.hpp"

namespace fastgrant::harness {

using nlohmann::json;

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::kCoordinated: return "coordinated";
    case Scheme::kSlotted: return "slotted";
    case Scheme::kUncoordinated: return "uncoordinated";
    case Scheme::kFug: return "fug";
  }
  return "?";
}

std::optional<Scheme> parse_scheme(std::string_view text) {
  for (auto s : {Scheme::kCoordinated, Scheme::kSlotted, Scheme::kUncoordinated, Scheme::kFug}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

std::string_view to_string(PredictorKind k) {
  switch (k) {
    case PredictorKind::kNone: return "none";
    case PredictorKind::kPeriodic: return "periodic";
    case PredictorKind::kOracle: return "oracle";
  }
  return "?";
}

namespace {

std::optional<PredictorKind> parse_predictor_kind(std::string_view t) {
  for (auto k : {PredictorKind::kNone, PredictorKind::kPeriodic, PredictorKind::kOracle}) {
    if (to_string(k) == t) return k;
  }
  return std::nullopt;
}

std::string_view to_string(Topology t) {
  switch (t) {
    case Topology::kNone: return "none";
    case Topology::kChain: return "chain";
    case Topology::kStar: return "star";
    case Topology::kEdges: return "edges";
  }
  return "?";
}

std::optional<Topology> parse_topology(std::string_view t) {
  for (auto k : {Topology::kNone, Topology::kChain, Topology::kStar, Topology::kEdges}) {
    if (to_string(k) == t) return k;
  }
  return std::nullopt;
}

std::string_view to_string(traffic::EpicenterRule r) {
  switch (r) {
    case traffic::EpicenterRule::kUniformRandomMtd: return "uniform-random-mtd";
    case traffic::EpicenterRule::kSpatialDisk: return "spatial-disk";
    case traffic::EpicenterRule::kFixed: return "fixed";
  }
  return "?";
}

std::optional<traffic::EpicenterRule> parse_epicenter(std::string_view t) {
  for (auto k : {traffic::EpicenterRule::kUniformRandomMtd, traffic::EpicenterRule::kSpatialDisk,
                 traffic::EpicenterRule::kFixed}) {
    if (to_string(k) == t) return k;
  }
  return std::nullopt;
}

// Walks one JSON object, recording type errors and unknown keys.
class Obj {
 public:
  Obj(const json* j, std::string path, std::vector<ConfigError>& errs)
      : j_(j), path_(std::move(path)), errs_(&errs) {
    if (j_ != nullptr && !j_->is_object()) {
      error("", "expected an object");
      j_ = nullptr;
    }
  }

  // Must be called once every key was read.
  void finish() {
    if (j_ == nullptr) return;
    for (const auto& [k, v] : j_->items()) {
      if (!seen_.count(k)) error(k, "unknown key");
    }
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void error(const std::string& key, const std::string& msg) {
    errs_->push_back({key.empty() ? path_ : at(key), msg});
  }

  Obj sub(const std::string& key) { return Obj(child(key), at(key), *errs_); }
  std::vector<ConfigError>& errs() { return *errs_; }

  const json* child(const std::string& key) {
    seen_.insert(key);
    if (j_ == nullptr) return nullptr;
    auto it = j_->find(key);
    if (it == j_->end()) return nullptr;
    return &*it;
  }

  template <typename T>
  void integer(const std::string& key, T& out) {
    const json* v = child(key);
    if (v == nullptr) return;
    if (!v->is_number_integer()) {
      error(key, "expected an integer");
      return;
    }
    out = v->get<T>();
  }

  template <typename T>
  void optional_integer(const std::string& key, std::optional<T>& out) {
    const json* v = child(key);
    if (v == nullptr) return;
    if (v->is_null()) {
      out.reset();
    } else if (!v->is_number_integer()) {
      error(key, "expected an integer or null");
    } else {
      out = v->get<T>();
    }
  }

  void number(const std::string& key, double& out) {
    const json* v = child(key);
    if (v == nullptr) return;
    if (!v->is_number()) {
      error(key, "expected a number");
      return;
    }
    out = v->get<double>();
  }

  void boolean(const std::string& key, bool& out) {
    const json* v = child(key);
    if (v == nullptr) return;
    if (!v->is_boolean()) {
      error(key, "expected true or false");
      return;
    }
    out = v->get<bool>();
  }

  void string(const std::string& key, std::string& out) {
    const json* v = child(key);
    if (v == nullptr) return;
    if (!v->is_string()) {
      error(key, "expected a string");
      return;
    }
    out = v->get<std::string>();
  }

  template <typename E, typename Parse>
  void enumeration(const std::string& key, E& out, Parse parse, const char* choices) {
    const json* v = child(key);
    if (v == nullptr) return;
    if (!v->is_string()) {
      error(key, fmt::format("expected one of {}", choices));
      return;
    }
    auto parsed = parse(v->get<std::string>());
    if (!parsed) {
      error(key, fmt::format("unknown value \"{}\", expected one of {}", v->get<std::string>(), choices));
      return;
    }
    out = *parsed;
  }

 private:
  const json* j_;
  std::string path_;
  std::vector<ConfigError>* errs_;
  std::set<std::string> seen_;
};

void read_qos(Obj o, traffic::QosSpec& qos) {
  o.integer("max_delay_ms", qos.max_delay_ms);
  o.number("packet_value", qos.packet_value);
  o.finish();
}

void read_app(const json& j, const std::string& path, std::vector<ConfigError>& errs,
              AppConfig& app) {
  Obj o(&j, path, errs);
  auto& p = app.profile;
  o.integer("app_id", p.app_id);
  o.integer("period_ms", p.period_ms);
  if (const json* ph = o.child("phase_ms")) {
    if (ph->is_null()) {
      app.random_phase = true;
    } else if (ph->is_number_integer()) {
      app.random_phase = false;
      p.phase_ms = ph->get<Millis>();
    } else {
      o.error("phase_ms", "expected an integer or null");
    }
  }
  o.integer("jitter_ms", p.jitter_ms);
  o.integer("size_rbs", p.size_rbs);
  o.enumeration("arrival", p.mode,
                [](const std::string& t) -> std::optional<traffic::ArrivalMode> {
                  if (t == "jittered") return traffic::ArrivalMode::kJittered;
                  if (t == "nhpp") return traffic::ArrivalMode::kNhpp;
                  return std::nullopt;
                },
                "jittered, nhpp");
  if (const json* r = o.child("rate_profile")) {
    if (!r->is_array()) {
      o.error("rate_profile", "expected an array of numbers");
    } else {
      p.rate_profile.clear();
      for (const auto& v : *r) {
        if (!v.is_number()) {
          o.error("rate_profile", "expected an array of numbers");
          break;
        }
        p.rate_profile.push_back(v.get<double>());
      }
    }
  }
  o.finish();
}

void read_events(Obj o, EventsConfig& e) {
  o.number("rate_per_ms", e.rate_per_ms);
  o.enumeration("topology", e.topology, [](const std::string& t) { return parse_topology(t); },
                "none, chain, star, edges");
  o.integer("first_mtd", e.first_mtd);
  o.integer("nodes", e.nodes);
  o.integer("delay_ms", e.delay_ms);
  o.number("trigger_prob", e.trigger_prob);
  if (const json* arr = o.child("edges")) {
    if (!arr->is_array()) {
      o.error("edges", "expected an array");
    } else {
      e.edges.clear();
      for (std::size_t i = 0; i < arr->size(); ++i) {
        Obj eo(&(*arr)[i], fmt::format("{}[{}]", o.at("edges"), i), o.errs());
        traffic::PropagationEdge edge;
        eo.integer("from", edge.from);
        eo.integer("to", edge.to);
        eo.integer("delay_ms", edge.delay_ms);
        eo.number("trigger_prob", edge.trigger_prob);
        eo.finish();
        e.edges.push_back(edge);
      }
    }
  }
  o.enumeration("epicenter", e.epicenter, [](const std::string& t) { return parse_epicenter(t); },
                "fixed, uniform-random-mtd, spatial-disk");
  o.integer("fixed_epicenter", e.fixed_epicenter);
  o.number("disk_radius_m", e.disk_radius_m);
  o.integer("packets_per_activation", e.packets_per_activation);
  o.integer("size_rbs", e.size_rbs);
  if (o.child("qos") != nullptr) read_qos(o.sub("qos"), e.qos);
  o.finish();
}

void read_predictor(Obj o, PredictorConfig& p) {
  o.enumeration("kind", p.kind, [](const std::string& t) { return parse_predictor_kind(t); },
                "none, periodic, oracle");
  o.integer("lookahead_ms", p.lookahead_ms);
  o.number("confidence_threshold", p.confidence_threshold);
  o.integer("min_support", p.estimator.min_support);
  o.integer("tolerance_ms", p.estimator.tolerance_ms);
  o.number("max_relative_spread", p.estimator.max_relative_spread);
  o.integer("max_observations", p.estimator.max_observations);
  o.boolean("events", p.events);
  o.integer("episode_window_ms", p.detector.window_ms);
  o.integer("explain_slack_ms", p.detector.explain_slack_ms);
  o.integer("report_grace_ms", p.detector.report_grace_ms);
  o.number("p_threshold", p.p_threshold);
  o.enumeration("score_policy", p.score_policy,
                [](const std::string& t) { return predict::parse_score_policy(t); },
                "coactivation, granger-gated, di-gated");
  o.boolean("smoothing", p.smoothing);
  o.integer("bin_ms", p.causality.sequences.bin_ms);
  o.integer("granger_max_lag", p.causality.granger_max_lag);
  o.integer("di_context", p.causality.di_context);
  o.integer("shuffles", p.causality.shuffles);
  o.finish();
}

void read_fug(Obj o, FugConfig& f) {
  o.integer("grant_wait_ms", f.grant_wait_ms);
  o.integer("grant_interval_ms", f.grant_interval_ms);
  o.optional_integer("budget", f.budget);
  o.integer("grant_rbs", f.grant_rbs);
  o.optional_integer("fallback_periodicity_ms", f.fallback_periodicity_ms);
  o.enumeration("policy", f.policy, [](const std::string& t) { return sched::parse_policy(t); },
                "oracle, round-robin, edf, eps-greedy, sleeping-ucb, q-learning");
  o.enumeration("reward", f.reward, [](const std::string& t) { return sched::parse_reward_kind(t); },
                "on-time, value-weighted");
  if (o.child("bandit") != nullptr) {
    Obj b = o.sub("bandit");
    b.number("epsilon", f.bandit.epsilon);
    b.boolean("epsilon_decay", f.bandit.epsilon_decay);
    b.number("ucb_c", f.bandit.ucb_c);
    b.finish();
  }
  if (o.child("q") != nullptr) {
    Obj q = o.sub("q");
    q.number("alpha", f.q.alpha);
    q.number("gamma", f.q.gamma);
    q.number("epsilon", f.q.epsilon);
    q.finish();
  }
  if (o.child("predictor") != nullptr) read_predictor(o.sub("predictor"), f.predictor);
  o.finish();
}

void read_ra(Obj o, access::RaConfig& ra) {
  o.integer("periodicity_ms", ra.periodicity_ms);
  o.integer("slots_per_opportunity", ra.slots_per_opportunity);
  o.integer("rbs_per_slot", ra.rbs_per_slot);
  o.number("capture_prob", ra.capture_prob);
  o.number("acb_factor", ra.acb_factor);
  if (const json* c = o.child("eab_barred_classes")) {
    if (!c->is_array()) {
      o.error("eab_barred_classes", "expected an array of integers");
    } else {
      ra.eab_barred_classes.clear();
      for (const auto& v : *c) {
        if (!v.is_number_integer()) {
          o.error("eab_barred_classes", "expected an array of integers");
          break;
        }
        ra.eab_barred_classes.insert(v.get<int>());
      }
    }
  }
  o.integer("backoff_window_ms", ra.backoff_window_ms);
  o.integer("max_attempts", ra.max_attempts);
  if (const json* h = o.child("handshake_delays_ms")) {
    if (!h->is_array() || h->size() != 3 ||
        !std::all_of(h->begin(), h->end(), [](const json& v) { return v.is_number_integer(); })) {
      o.error("handshake_delays_ms", "expected three integers [msg2, msg3, msg4]");
    } else {
      ra.handshake = {(*h)[0].get<Millis>(), (*h)[1].get<Millis>(), (*h)[2].get<Millis>()};
    }
  }
  o.finish();
}

void range(std::vector<ConfigError>& errs, bool ok, const std::string& path, const std::string& msg) {
  if (!ok) errs.push_back({path, msg});
}

}  // namespace

access::UplinkFrame SimConfig::frame() const {
  return access::UplinkFrame{cell.uplink_rbs_per_ms, ra.ra_rbs()};
}

Millis SimConfig::fallback_periodicity() const {
  return fug.fallback_periodicity_ms.value_or(ra.periodicity_ms);
}

ConfigErrors::ConfigErrors(std::vector<ConfigError> errors)
    : std::runtime_error([&] {
        std::string msg;
        for (const auto& e : errors) msg += fmt::format("{}: {}\n", e.path, e.message);
        return msg;
      }()),
      errors_(std::move(errors)) {}

std::vector<ConfigError> validate(const SimConfig& c) {
  std::vector<ConfigError> e;
  range(e, c.horizon_ms >= 1, "horizon_ms", "must be >= 1");
  range(e, c.warmup_ms >= 0 && c.warmup_ms < std::max<Millis>(c.horizon_ms, 1), "warmup_ms",
        "must be in [0, horizon_ms)");
  range(e, !c.seeds.empty(), "seeds", "at least one seed is required");
  range(e, c.threads >= 0, "threads", "must be >= 0");
  range(e, c.cell.mtd_count >= 0, "cell.mtd_count", "must be >= 0");
  range(e, c.cell.uplink_rbs_per_ms >= 1, "cell.uplink_rbs_per_ms", "must be >= 1");
  range(e, c.cell.radius_m > 0, "cell.radius_m", "must be > 0");
  range(e, c.cell.eab_classes >= 1, "cell.eab_classes", "must be >= 1");

  const auto& ra = c.ra;
  range(e, ra.periodicity_ms >= 1 && ra.periodicity_ms <= 20, "ra.periodicity_ms",
        "must be in [1, 20]: RA opportunities recur every 1 ms to every 20 ms");
  range(e, ra.slots_per_opportunity >= 1, "ra.slots_per_opportunity", "must be >= 1");
  range(e, ra.rbs_per_slot >= 1, "ra.rbs_per_slot", "must be >= 1");
  range(e, ra.capture_prob >= 0 && ra.capture_prob <= 1, "ra.capture_prob", "must be in [0, 1]");
  range(e, ra.acb_factor >= 0 && ra.acb_factor <= 1, "ra.acb_factor", "must be in [0, 1]");
  range(e, ra.backoff_window_ms >= 0, "ra.backoff_window_ms", "must be >= 0");
  range(e, ra.max_attempts >= 1, "ra.max_attempts", "must be >= 1");
  range(e, ra.handshake.msg2 >= 0 && ra.handshake.msg3 >= 0 && ra.handshake.msg4 >= 0,
        "ra.handshake_delays_ms", "delays must be >= 0");
  const int data_at_ra = c.cell.uplink_rbs_per_ms - ra.ra_rbs();
  range(e, ra.ra_rbs() <= c.cell.uplink_rbs_per_ms, "ra.slots_per_opportunity",
        fmt::format("RA RBs per opportunity ({} slots x {} RBs) exceed cell.uplink_rbs_per_ms ({})",
                    ra.slots_per_opportunity, ra.rbs_per_slot, c.cell.uplink_rbs_per_ms));

  const auto& t = c.traffic;
  range(e, t.qos.max_delay_ms >= 1, "traffic.qos.max_delay_ms", "must be >= 1");
  range(e, t.qos.packet_value > 0, "traffic.qos.packet_value", "must be > 0");
  if (t.periodic_mtds) {
    range(e, *t.periodic_mtds >= 0 && *t.periodic_mtds <= c.cell.mtd_count, "traffic.periodic_mtds",
          "must be in [0, cell.mtd_count]");
  }
  for (std::size_t i = 0; i < t.apps.size(); ++i) {
    const auto& p = t.apps[i].profile;
    const std::string at = fmt::format("traffic.apps[{}]", i);
    range(e, p.period_ms >= 1, at + ".period_ms", "must be >= 1");
    if (!t.apps[i].random_phase) {
      range(e, p.phase_ms >= 0 && p.phase_ms < p.period_ms, at + ".phase_ms", "must be in [0, period_ms)");
    }
    range(e, p.jitter_ms >= 0 && 2 * p.jitter_ms < p.period_ms, at + ".jitter_ms",
          "must be >= 0 and below period_ms / 2");
    range(e, p.size_rbs >= 1, at + ".size_rbs", "must be >= 1");
    range(e, p.size_rbs <= data_at_ra, at + ".size_rbs", "must fit in the data RBs of an RA tick");
    if (p.mode == traffic::ArrivalMode::kNhpp) {
      range(e, !p.rate_profile.empty() &&
                   std::all_of(p.rate_profile.begin(), p.rate_profile.end(),
                               [](double r) { return r >= 0; }) &&
                   *std::max_element(p.rate_profile.begin(), p.rate_profile.end()) > 0,
            at + ".rate_profile", "nhpp arrivals need a non-empty, non-negative, non-zero profile");
    }
    for (std::size_t j = 0; j < i; ++j) {
      range(e, t.apps[j].profile.app_id != p.app_id, at + ".app_id", "duplicate app_id");
    }
  }
  const auto& ev = t.events;
  range(e, ev.rate_per_ms >= 0, "traffic.events.rate_per_ms", "must be >= 0");
  range(e, ev.trigger_prob >= 0 && ev.trigger_prob <= 1, "traffic.events.trigger_prob", "must be in [0, 1]");
  range(e, ev.delay_ms >= 1, "traffic.events.delay_ms", "must be >= 1");
  range(e, ev.packets_per_activation >= 1, "traffic.events.packets_per_activation", "must be >= 1");
  range(e, ev.size_rbs >= 1 && ev.size_rbs <= data_at_ra, "traffic.events.size_rbs",
        "must be >= 1 and fit in the data RBs of an RA tick");
  range(e, ev.qos.max_delay_ms >= 1, "traffic.events.qos.max_delay_ms", "must be >= 1");
  range(e, ev.qos.packet_value > 0, "traffic.events.qos.packet_value", "must be > 0");
  range(e, ev.disk_radius_m > 0, "traffic.events.disk_radius_m", "must be > 0");
  const auto n = static_cast<MtdId>(std::max(c.cell.mtd_count, 0));
  if (ev.topology == Topology::kChain || ev.topology == Topology::kStar) {
    range(e, ev.nodes >= 1 && ev.first_mtd + static_cast<MtdId>(ev.nodes) <= n, "traffic.events.nodes",
          "topology nodes must lie within cell.mtd_count");
  }
  for (std::size_t i = 0; i < ev.edges.size(); ++i) {
    const auto& ed = ev.edges[i];
    const std::string at = fmt::format("traffic.events.edges[{}]", i);
    range(e, ed.from < n && ed.to < n, at, "edge endpoints must be MTD ids");
    range(e, ed.delay_ms >= 1, at + ".delay_ms", "must be >= 1");
    range(e, ed.trigger_prob >= 0 && ed.trigger_prob <= 1, at + ".trigger_prob", "must be in [0, 1]");
  }
  if (ev.rate_per_ms > 0) {
    range(e, ev.epicenter != traffic::EpicenterRule::kFixed || ev.fixed_epicenter < n,
          "traffic.events.fixed_epicenter", "must be an MTD id");
  }

  range(e, c.uncoordinated.transmit_prob > 0 && c.uncoordinated.transmit_prob <= 1,
        "uncoordinated.transmit_prob", "must be in (0, 1]");
  range(e, c.uncoordinated.capture_prob >= 0 && c.uncoordinated.capture_prob <= 1,
        "uncoordinated.capture_prob", "must be in [0, 1]");

  const auto& f = c.fug;
  range(e, f.grant_wait_ms >= 0, "fug.grant_wait_ms", "must be >= 0");
  range(e, f.grant_interval_ms >= 1, "fug.grant_interval_ms", "must be >= 1");
  if (f.budget) range(e, *f.budget >= 0, "fug.budget", "must be >= 0");
  range(e, f.grant_rbs >= 1 && f.grant_rbs <= data_at_ra, "fug.grant_rbs",
        "must be >= 1 and fit in the data RBs of an RA tick");
  if (f.fallback_periodicity_ms) {
    range(e, *f.fallback_periodicity_ms >= 1 && *f.fallback_periodicity_ms <= 20,
          "fug.fallback_periodicity_ms", "must be in [1, 20]");
  }
  range(e, f.bandit.epsilon >= 0 && f.bandit.epsilon <= 1, "fug.bandit.epsilon", "must be in [0, 1]");
  range(e, f.bandit.ucb_c >= 0, "fug.bandit.ucb_c", "must be >= 0");
  range(e, f.q.alpha > 0 && f.q.alpha <= 1, "fug.q.alpha", "must be in (0, 1]");
  range(e, f.q.gamma >= 0 && f.q.gamma < 1, "fug.q.gamma", "must be in [0, 1)");
  range(e, f.q.epsilon >= 0 && f.q.epsilon <= 1, "fug.q.epsilon", "must be in [0, 1]");
  const auto& p = f.predictor;
  range(e, p.lookahead_ms >= 1, "fug.predictor.lookahead_ms", "must be >= 1");
  range(e, p.confidence_threshold >= 0 && p.confidence_threshold <= 1,
        "fug.predictor.confidence_threshold", "must be in [0, 1]");
  range(e, p.estimator.min_support >= 2, "fug.predictor.min_support", "must be >= 2");
  range(e, p.estimator.tolerance_ms >= 0, "fug.predictor.tolerance_ms", "must be >= 0");
  range(e, p.estimator.max_relative_spread > 0, "fug.predictor.max_relative_spread", "must be > 0");
  range(e, p.estimator.max_observations >= p.estimator.min_support, "fug.predictor.max_observations",
        "must be >= min_support");
  range(e, p.detector.window_ms >= 1, "fug.predictor.episode_window_ms", "must be >= 1");
  range(e, p.detector.explain_slack_ms >= 0, "fug.predictor.explain_slack_ms", "must be >= 0");
  range(e, p.detector.report_grace_ms >= 0, "fug.predictor.report_grace_ms", "must be >= 0");
  range(e, p.p_threshold >= 0 && p.p_threshold <= 1, "fug.predictor.p_threshold", "must be in [0, 1]");
  range(e, p.causality.sequences.bin_ms >= 1, "fug.predictor.bin_ms", "must be >= 1");
  range(e, p.causality.granger_max_lag >= 1, "fug.predictor.granger_max_lag", "must be >= 1");
  range(e, p.causality.di_context >= 1 && p.causality.di_context <= 2, "fug.predictor.di_context",
        "must be 1 or 2");
  range(e, p.causality.shuffles >= 1, "fug.predictor.shuffles", "must be >= 1");
  if (c.scheme == Scheme::kFug && f.policy == sched::Policy::kOracle) {
    range(e, p.kind == PredictorKind::kOracle, "fug.policy",
          "the oracle policy reads ground truth and needs the oracle predictor");
  }
  return e;
}

SimConfig parse_config(const std::string& text) {
  std::vector<ConfigError> errs;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& ex) {
    throw ConfigErrors({{"", fmt::format("malformed JSON: {}", ex.what())}});
  }
  SimConfig c;
  Obj root(&j, "", errs);
  root.enumeration("scheme", c.scheme, [](const std::string& t) { return parse_scheme(t); },
                   "coordinated, slotted, uncoordinated, fug");
  root.integer("horizon_ms", c.horizon_ms);
  root.integer("warmup_ms", c.warmup_ms);
  root.integer("threads", c.threads);
  if (const json* s = root.child("seeds")) {
    if (!s->is_array() || !std::all_of(s->begin(), s->end(), [](const json& v) {
          return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
        })) {
      root.error("seeds", "expected an array of non-negative integers");
    } else {
      c.seeds.clear();
      for (const auto& v : *s) c.seeds.push_back(v.get<std::uint64_t>());
    }
  }
  if (root.child("cell") != nullptr) {
    Obj o = root.sub("cell");
    o.integer("mtd_count", c.cell.mtd_count);
    o.integer("uplink_rbs_per_ms", c.cell.uplink_rbs_per_ms);
    o.number("radius_m", c.cell.radius_m);
    o.integer("eab_classes", c.cell.eab_classes);
    o.finish();
  }
  if (root.child("traffic") != nullptr) {
    Obj o = root.sub("traffic");
    o.enumeration("mode", c.traffic.mode,
                  [](const std::string& t) -> std::optional<TrafficMode> {
                    if (t == "periodic") return TrafficMode::kPeriodic;
                    if (t == "saturated") return TrafficMode::kSaturated;
                    return std::nullopt;
                  },
                  "periodic, saturated");
    o.optional_integer("periodic_mtds", c.traffic.periodic_mtds);
    if (o.child("qos") != nullptr) read_qos(o.sub("qos"), c.traffic.qos);
    if (const json* apps = o.child("apps")) {
      if (!apps->is_array()) {
        o.error("apps", "expected an array");
      } else {
        for (std::size_t i = 0; i < apps->size(); ++i) {
          AppConfig app;
          app.profile.app_id = static_cast<std::uint32_t>(i);
          read_app((*apps)[i], fmt::format("traffic.apps[{}]", i), errs, app);
          c.traffic.apps.push_back(app);
        }
      }
    }
    if (o.child("events") != nullptr) read_events(o.sub("events"), c.traffic.events);
    o.finish();
  }
  if (root.child("ra") != nullptr) read_ra(root.sub("ra"), c.ra);
  if (root.child("uncoordinated") != nullptr) {
    Obj o = root.sub("uncoordinated");
    o.number("transmit_prob", c.uncoordinated.transmit_prob);
    o.number("capture_prob", c.uncoordinated.capture_prob);
    o.finish();
  }
  if (root.child("fug") != nullptr) read_fug(root.sub("fug"), c.fug);
  if (root.child("output") != nullptr) {
    Obj o = root.sub("output");
    o.string("dir", c.output.dir);
    o.enumeration("trace_level", c.output.trace_level,
                  [](const std::string& t) { return sim::parse_trace_level(t); }, "none, access, full");
    o.boolean("episodes", c.output.episodes);
    o.boolean("regret", c.output.regret);
    o.finish();
  }
  root.finish();
  for (auto& e : validate(c)) {
    const bool seen = std::any_of(errs.begin(), errs.end(), [&](const ConfigError& x) { return x.path == e.path; });
    if (!seen) errs.push_back(std::move(e));
  }
  if (!errs.empty()) throw ConfigErrors(std::move(errs));
  return c;
}

std::string serialize_config(const SimConfig& c) {
  json j;
  j["scheme"] = to_string(c.scheme);
  j["horizon_ms"] = c.horizon_ms;
  j["warmup_ms"] = c.warmup_ms;
  j["seeds"] = c.seeds;
  j["threads"] = c.threads;
  j["cell"] = {{"mtd_count", c.cell.mtd_count},
               {"uplink_rbs_per_ms", c.cell.uplink_rbs_per_ms},
               {"radius_m", c.cell.radius_m},
               {"eab_classes", c.cell.eab_classes}};
  auto qos = [](const traffic::QosSpec& q) {
    return json{{"max_delay_ms", q.max_delay_ms}, {"packet_value", q.packet_value}};
  };
  json apps = json::array();
  for (const auto& a : c.traffic.apps) {
    const auto& p = a.profile;
    apps.push_back({{"app_id", p.app_id},
                    {"period_ms", p.period_ms},
                    {"phase_ms", a.random_phase ? json(nullptr) : json(p.phase_ms)},
                    {"jitter_ms", p.jitter_ms},
                    {"size_rbs", p.size_rbs},
                    {"arrival", p.mode == traffic::ArrivalMode::kNhpp ? "nhpp" : "jittered"},
                    {"rate_profile", p.rate_profile}});
  }
  const auto& ev = c.traffic.events;
  json edges = json::array();
  for (const auto& e : ev.edges) {
    edges.push_back({{"from", e.from}, {"to", e.to}, {"delay_ms", e.delay_ms}, {"trigger_prob", e.trigger_prob}});
  }
  j["traffic"] = {
      {"mode", c.traffic.mode == TrafficMode::kSaturated ? "saturated" : "periodic"},
      {"periodic_mtds", c.traffic.periodic_mtds ? json(*c.traffic.periodic_mtds) : json(nullptr)},
      {"qos", qos(c.traffic.qos)},
      {"apps", apps},
      {"events",
       {{"rate_per_ms", ev.rate_per_ms},
        {"topology", to_string(ev.topology)},
        {"first_mtd", ev.first_mtd},
        {"nodes", ev.nodes},
        {"delay_ms", ev.delay_ms},
        {"trigger_prob", ev.trigger_prob},
        {"edges", edges},
        {"epicenter", to_string(ev.epicenter)},
        {"fixed_epicenter", ev.fixed_epicenter},
        {"disk_radius_m", ev.disk_radius_m},
        {"packets_per_activation", ev.packets_per_activation},
        {"size_rbs", ev.size_rbs},
        {"qos", qos(ev.qos)}}}};
  j["ra"] = {{"periodicity_ms", c.ra.periodicity_ms},
             {"slots_per_opportunity", c.ra.slots_per_opportunity},
             {"rbs_per_slot", c.ra.rbs_per_slot},
             {"capture_prob", c.ra.capture_prob},
             {"acb_factor", c.ra.acb_factor},
             {"eab_barred_classes", c.ra.eab_barred_classes},
             {"backoff_window_ms", c.ra.backoff_window_ms},
             {"max_attempts", c.ra.max_attempts},
             {"handshake_delays_ms", {c.ra.handshake.msg2, c.ra.handshake.msg3, c.ra.handshake.msg4}}};
  j["uncoordinated"] = {{"transmit_prob", c.uncoordinated.transmit_prob},
                        {"capture_prob", c.uncoordinated.capture_prob}};
  const auto& f = c.fug;
  const auto& p = f.predictor;
  j["fug"] = {
      {"grant_wait_ms", f.grant_wait_ms},
      {"grant_interval_ms", f.grant_interval_ms},
      {"budget", f.budget ? json(*f.budget) : json(nullptr)},
      {"grant_rbs", f.grant_rbs},
      {"fallback_periodicity_ms", f.fallback_periodicity_ms ? json(*f.fallback_periodicity_ms) : json(nullptr)},
      {"policy", sched::to_string(f.policy)},
      {"reward", sched::to_string(f.reward)},
      {"bandit", {{"epsilon", f.bandit.epsilon}, {"epsilon_decay", f.bandit.epsilon_decay}, {"ucb_c", f.bandit.ucb_c}}},
      {"q", {{"alpha", f.q.alpha}, {"gamma", f.q.gamma}, {"epsilon", f.q.epsilon}}},
      {"predictor",
       {{"kind", to_string(p.kind)},
        {"lookahead_ms", p.lookahead_ms},
        {"confidence_threshold", p.confidence_threshold},
        {"min_support", p.estimator.min_support},
        {"tolerance_ms", p.estimator.tolerance_ms},
        {"max_relative_spread", p.estimator.max_relative_spread},
        {"max_observations", p.estimator.max_observations},
        {"events", p.events},
        {"episode_window_ms", p.detector.window_ms},
        {"explain_slack_ms", p.detector.explain_slack_ms},
        {"report_grace_ms", p.detector.report_grace_ms},
        {"p_threshold", p.p_threshold},
        {"score_policy", predict::to_string(p.score_policy)},
        {"smoothing", p.smoothing},
        {"bin_ms", p.causality.sequences.bin_ms},
        {"granger_max_lag", p.causality.granger_max_lag},
        {"di_context", p.causality.di_context},
        {"shuffles", p.causality.shuffles}}}};
  j["output"] = {{"dir", c.output.dir},
                 {"trace_level", sim::to_string(c.output.trace_level)},
                 {"episodes", c.output.episodes},
                 {"regret", c.output.regret}};
  return j.dump(2);
}

bool operator==(const SimConfig& a, const SimConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

}  // namespace fastgrant::harness
