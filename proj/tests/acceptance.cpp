// Acceptance checks; one PASS/FAIL line per criterion.
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numeric>

#include <boost/math/distributions/binomial.hpp>

#include "fastgrant/access/access.hpp"
#include "fastgrant/harness/experiment.hpp"
#include "fastgrant/harness/simulation.hpp"
#include "fastgrant/predict/causality.hpp"
#include "fastgrant/predict/events.hpp"
#include "fastgrant/predict/periodic.hpp"
#include "fastgrant/sched/bandit.hpp"
#include "fastgrant/traffic/traffic.hpp"
#include "stats.hpp"

using namespace fastgrant;
using namespace fastgrant::harness;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Every report produced by criteria 1-10, for the conservation post-pass.
std::vector<MetricsReport> g_reports;

MetricsReport keep(MetricsReport r) {
  g_reports.push_back(r);
  return r;
}

double success_rate(int n, int k) { return std::pow(1.0 - 1.0 / k, n - 1); }

SimConfig saturated(Scheme scheme, int n, int k, Millis horizon) {
  SimConfig cfg;
  cfg.scheme = scheme;
  cfg.horizon_ms = horizon;
  cfg.cell.mtd_count = n;
  cfg.traffic.mode = TrafficMode::kSaturated;
  cfg.traffic.qos.max_delay_ms = 1'000'000'000;
  cfg.ra.periodicity_ms = 1;
  cfg.ra.handshake = {0, 0, 0};
  cfg.ra.backoff_window_ms = 0;
  cfg.ra.max_attempts = 1'000'000'000;
  if (scheme == Scheme::kUncoordinated) {
    cfg.cell.uplink_rbs_per_ms = k;
  } else {
    cfg.ra.slots_per_opportunity = k;
    cfg.cell.uplink_rbs_per_ms = 6 * k + n;
  }
  return cfg;
}

Outcome determinism() {
  SimConfig cfg;
  cfg.scheme = Scheme::kFug;
  cfg.horizon_ms = 20'000;
  cfg.cell.mtd_count = 60;
  cfg.ra.slots_per_opportunity = 3;
  AppConfig app;
  app.profile.period_ms = 400;
  app.profile.jitter_ms = 10;
  cfg.traffic.apps.push_back(app);
  cfg.traffic.events.rate_per_ms = 0.001;
  cfg.traffic.events.topology = Topology::kChain;
  cfg.traffic.events.first_mtd = 40;
  cfg.traffic.events.nodes = 10;
  cfg.fug.policy = sched::Policy::kSleepingUcb;
  bool same = true;
  std::uint64_t records = 0;
  for (auto scheme : {Scheme::kCoordinated, Scheme::kSlotted, Scheme::kUncoordinated, Scheme::kFug}) {
    cfg.scheme = scheme;
    sim::StringTraceSink a(sim::TraceLevel::kFull), b(sim::TraceLevel::kFull);
    RunOptions oa, ob;
    oa.trace = &a;
    ob.trace = &b;
    const auto ra = keep(run(cfg, 77, oa));
    const auto rb = keep(run(cfg, 77, ob));
    same = same && a.text() == b.text() && ra.to_json() == rb.to_json() && !a.text().empty();
    records += a.records();
  }
  return {same, fmt::format("4 schemes x 2 runs, {} trace records, byte-identical={}", records, same)};
}

Outcome collision_analytics() {
  const std::vector<std::pair<int, int>> cases{{10, 10}, {30, 10}, {100, 54}, {200, 50}};
  const int seeds = 10;
  const Millis per_seed = 10'000;  // 10 x 10^4 = 10^5 opportunities / rounds
  bool ok = true;
  std::string detail;
  for (auto scheme : {Scheme::kCoordinated, Scheme::kUncoordinated}) {
    for (auto [n, k] : cases) {
      std::vector<double> rates;
      for (int s = 1; s <= seeds; ++s) {
        const auto r = keep(run(saturated(scheme, n, k, per_seed), static_cast<std::uint64_t>(s)));
        if (scheme == Scheme::kCoordinated) {
          rates.push_back(static_cast<double>(r.ra_successes) / static_cast<double>(r.ra_attempts));
        } else {
          rates.push_back(1.0 - *r.collision_probability);
        }
      }
      const double m = teststats::mean(rates), se = teststats::std_error(rates), want = success_rate(n, k);
      const bool hit = std::abs(m - want) < 3 * se;
      ok = ok && hit;
      detail += fmt::format("{}({},{}): {:.5f} vs {:.5f} (se {:.5f}){}; ", scheme == Scheme::kCoordinated ? "ra" : "unc",
                            n, k, m, want, se, hit ? "" : " MISS");
    }
  }
  return {ok, detail};
}

Outcome table_reproduction() {
  SimConfig cfg;
  cfg.horizon_ms = 120'000;
  cfg.warmup_ms = 40'000;
  cfg.cell.mtd_count = 1000;
  cfg.cell.uplink_rbs_per_ms = 100;
  cfg.ra.slots_per_opportunity = 10;
  cfg.ra.periodicity_ms = 5;
  AppConfig app;
  app.profile.period_ms = 5000;
  app.profile.jitter_ms = 2;
  cfg.traffic.apps.push_back(app);
  cfg.traffic.qos.max_delay_ms = 2000;
  cfg.threads = 1;
  cfg.seeds.clear();
  for (std::uint64_t s = 1; s <= 20; ++s) cfg.seeds.push_back(s);
  const std::vector<Scheme> schemes{Scheme::kCoordinated, Scheme::kSlotted, Scheme::kFug};
  const auto table = compare_schemes(cfg, schemes);
  bool a = true, b = true, c = true;
  int ordered = 0;
  double fug_p50 = 0, coord_p50 = 0, slot_p50 = 0;
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    const auto& coord = keep(table.rows[0].runs[i]);
    const auto& slot = keep(table.rows[1].runs[i]);
    const auto& fug = keep(table.rows[2].runs[i]);
    a = a && fug.collision_count == 0;
    b = b && coord.signaling_rb_units == 6 * coord.ra_attempts && fug.broadcast_messages == fug.grant_intervals &&
        fug.grant_intervals == static_cast<std::uint64_t>(cfg.horizon_ms) && fug.broadcast_messages > 0;
    const auto f = fug.latency.percentile(0.5), co = coord.latency.percentile(0.5), s = slot.latency.percentile(0.5);
    const bool in_order = f && co && s && *f < *co && *co < *s;
    ordered += in_order ? 1 : 0;
    c = c && in_order;
    fug_p50 += f.value_or(-1) / 20.0;
    coord_p50 += co.value_or(-1) / 20.0;
    slot_p50 += s.value_or(-1) / 20.0;
  }
  return {a && b && c,
          fmt::format("(a) fug collisions all 0: {}; (b) signaling identities: {}; (c) p50 ordered in {}/20 seeds "
                      "(mean p50 fug {:.1f} < coordinated {:.1f} < slotted {:.1f} ms)",
                      a, b, ordered, fug_p50, coord_p50, slot_p50)};
}

// Chi-square GOF of ACB pass counts against Binomial(n, p), bins merged so
// every expected count is at least 5.
Outcome acb_binomial() {
  const int n = 20, trials = 1000;
  std::vector<MtdId> c(n);
  std::iota(c.begin(), c.end(), MtdId{0});
  bool ok = true;
  std::string detail;
  for (double p : {0.1, 0.5, 0.9}) {
    sim::RngStream rng(2024, fmt::format("acb-{}", p));
    std::vector<double> observed(n + 1, 0.0);
    for (int t = 0; t < trials; ++t) observed[access::acb_filter(c, p, rng).allowed.size()] += 1;
    boost::math::binomial_distribution<> dist(n, p);
    std::vector<double> o, e;
    double acc_o = 0, acc_e = 0;
    for (int k = 0; k <= n; ++k) {
      acc_o += observed[k];
      acc_e += trials * boost::math::pdf(dist, k);
      if (acc_e >= 5.0) {
        o.push_back(acc_o);
        e.push_back(acc_e);
        acc_o = acc_e = 0;
      }
    }
    o.back() += acc_o;
    e.back() += acc_e;
    double chi2 = 0;
    for (std::size_t i = 0; i < o.size(); ++i) chi2 += (o[i] - e[i]) * (o[i] - e[i]) / e[i];
    const double crit = teststats::chi2_critical(static_cast<double>(o.size() - 1), 0.01);
    ok = ok && chi2 < crit;
    detail += fmt::format("p={}: chi2 {:.2f} < {:.2f} ({} bins); ", p, chi2, crit, o.size());
  }
  return {ok, detail};
}

Outcome nhpp_ks() {
  const double lambda = 0.05;
  sim::RngStream rng(5, "ks-nhpp");
  const auto ts = traffic::sample_nhpp([&](double) { return lambda; }, lambda, 2'100'000, rng);
  std::vector<double> gaps;
  double prev = 0;
  for (double t : ts) {
    if (gaps.size() == 100'000) break;
    gaps.push_back(t - prev);
    prev = t;
  }
  if (gaps.size() < 100'000) return {false, "fewer than 10^5 arrivals"};
  const double d = teststats::ks_statistic(gaps, [&](double x) { return 1.0 - std::exp(-lambda * x); });
  const double crit = teststats::ks_critical_1pct(gaps.size());
  return {d < crit, fmt::format("n=1e5, D={:.5f} < {:.5f}", d, crit)};
}

Outcome periodic_predictor() {
  SimConfig cfg;
  cfg.scheme = Scheme::kFug;
  cfg.horizon_ms = 5000 + 100;
  cfg.warmup_ms = 1500;
  cfg.cell.mtd_count = 100;
  cfg.cell.uplink_rbs_per_ms = 100;
  cfg.ra.slots_per_opportunity = 8;
  AppConfig app;
  app.profile.period_ms = 100;
  app.profile.jitter_ms = 5;
  cfg.traffic.apps.push_back(app);
  cfg.fug.grant_wait_ms = 20;
  cfg.fug.predictor.lookahead_ms = 10;
  cfg.fug.predictor.events = false;
  std::vector<predict::PeriodicEstimate> estimates;
  RunOptions opts;
  opts.estimates = &estimates;
  const auto r = keep(run(cfg, 6, opts));
  int good = 0;
  for (const auto& e : estimates) {
    if (!e.empty() && std::abs(e.components[0].period_ms - 100) <= 5) ++good;
  }
  const double frac = good / 100.0;
  const double recall = r.recall.value_or(0.0);
  const double waste = r.waste_fraction.value_or(1.0);
  return {frac >= 0.99 && recall >= 0.95 && waste <= 0.05,
          fmt::format("periods within 5 ms: {:.2f}; closed-loop recall {:.4f}; wasted-grant fraction {:.4f}", frac,
                      recall, waste)};
}

Outcome causality_direction() {
  const std::size_t L = 100'000;
  sim::RngStream bits(7, "bits");
  predict::Sequence x(L), y(L, 0);
  for (auto& b : x) b = bits.uniform() < 0.5 ? 1 : 0;
  for (std::size_t t = 1; t < L; ++t) y[t] = x[t - 1];
  const double di_xy = predict::directed_information(x, y, 1);
  const double di_yx = predict::directed_information(y, x, 1);
  sim::RngStream rng(8, "null");
  auto cutoff = [&](const predict::Sequence& cause, const predict::Sequence& effect) {
    return predict::permutation_null(
               cause, {},
               [&](std::span<const std::uint8_t> xs, const predict::Segments& s) {
                 return predict::granger_score(xs, effect, 2, s).score;
               },
               200, 0.95, rng)
        .cutoff;
  };
  const double g_xy = predict::granger_score(x, y, 2).score;
  const double g_yx = predict::granger_score(y, x, 2).score;
  const double c_xy = cutoff(x, y), c_yx = cutoff(y, x);
  const bool ok = di_xy >= 0.9 && di_yx <= 0.05 && g_xy > c_xy && g_yx <= c_yx;
  return {ok, fmt::format("DI x->y {:.4f}, y->x {:.5f}; Granger x->y {:.3f} vs cutoff {:.2e}, y->x {:.2e} vs cutoff "
                          "{:.2e}",
                          di_xy, di_yx, g_xy, c_xy, g_yx, c_yx)};
}

Outcome cascade_prediction() {
  SimConfig cfg;
  cfg.scheme = Scheme::kFug;
  cfg.cell.mtd_count = 20;
  cfg.warmup_ms = 1'500'000;
  cfg.horizon_ms = 3'000'000;
  cfg.traffic.events.rate_per_ms = 1.0 / 10'000;
  cfg.traffic.events.topology = Topology::kChain;
  cfg.traffic.events.first_mtd = 0;
  cfg.traffic.events.nodes = 20;
  cfg.traffic.events.delay_ms = 20;
  cfg.traffic.events.trigger_prob = 1.0;
  cfg.fug.predictor.p_threshold = 0.5;
  std::vector<predict::EpisodeRecord> episodes;
  RunOptions opts;
  opts.episodes = &episodes;
  const auto r = keep(run(cfg, 8, opts));

  // Offline: stats from the first 100 episodes the base station closed.
  if (episodes.size() < 100) return {false, fmt::format("only {} episodes detected", episodes.size())};
  predict::CausalStats stats;
  std::size_t before_warmup = 0;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    if (i < 100) stats.update_event_stats(episodes[i]);
    before_warmup += episodes[i].opened_at < cfg.warmup_ms ? 1 : 0;
  }
  const auto cascade = predict::predict_event_cascade(stats, 0, 0.5, predict::ScorePolicy::kCoactivation);
  bool exact = cascade.size() == 19;
  for (std::size_t i = 0; exact && i < cascade.size(); ++i) {
    exact = cascade[i].mtd == i + 1 && cascade[i].eta_ms == 20 * static_cast<Millis>(i + 1);
  }
  const double served = r.cascade_packets == 0 ? 0.0
                                               : static_cast<double>(r.cascade_via_grant) /
                                                     static_cast<double>(r.cascade_packets);
  return {exact && before_warmup >= 100 && served >= 0.95,
          fmt::format("cascade after 100 episodes: {} entries, order and ETAs exact={}; {} training episodes; "
                      "grant-served cascade packets {}/{} = {:.4f}",
                      cascade.size(), exact, before_warmup, r.cascade_via_grant, r.cascade_packets, served)};
}

Outcome bandit_regret() {
  const std::vector<double> means{0.9, 0.5, 0.1};
  const int T = 10'000, seeds = 50;
  double early = 0, late = 0, best_rate = 0;
  bool sleeping_zero = true;
  std::uint64_t correct_rounds = 0;
  for (int s = 1; s <= seeds; ++s) {
    sched::BanditState st;
    sim::RngStream rng(static_cast<std::uint64_t>(s), "sched");
    sim::RngStream env(static_cast<std::uint64_t>(s), "env");
    sched::RegretTrace tr;
    sched::TrueMeans tm{{0, 0.9}, {1, 0.5}, {2, 0.1}};
    sched::AvailabilitySet all;
    all.arms = {{0, 0, 1}, {1, 0, 1}, {2, 0, 1}};
    int best = 0;
    for (int t = 1; t <= T; ++t) {
      const auto c = sched::select_grants(all, 1, sched::Policy::kSleepingUcb, st, rng);
      st.update(c[0], env.uniform() < means[c[0]] ? 1.0 : 0.0);
      sched::regret_update(tr, static_cast<std::uint64_t>(t), all, c, 1, tm);
      (t <= T / 2 ? early : late) += tr.rows.back().regret;
      if (t > T - 1000 && c[0] == 0) ++best;
    }
    best_rate += best / 1000.0 / seeds;

    // Sleeping: the 0.9 arm is asleep in odd rounds.
    sched::BanditState sl;
    sched::RegretTrace str;
    for (int t = 1; t <= T; ++t) {
      sched::AvailabilitySet avail;
      if (t % 2 == 0) avail.arms.push_back({0, 0, 1});
      avail.arms.push_back({1, 0, 1});
      avail.arms.push_back({2, 0, 1});
      const auto c = sched::select_grants(avail, 1, sched::Policy::kSleepingUcb, sl, rng);
      sl.update(c[0], env.uniform() < means[c[0]] ? 1.0 : 0.0);
      sched::regret_update(str, static_cast<std::uint64_t>(t), avail, c, 1, tm);
      const MtdId best_avail = t % 2 == 0 ? 0 : 1;
      if (c[0] == best_avail) {
        ++correct_rounds;
        sleeping_zero = sleeping_zero && str.rows.back().regret == 0.0;
      }
    }
  }
  early /= seeds;
  late /= seeds;
  return {late < early && best_rate > 0.9 && sleeping_zero && correct_rounds > 0,
          fmt::format("mean regret [1,T/2] {:.2f} > [T/2,T] {:.2f}; last-1000 best-arm rate {:.4f}; sleeping: zero "
                      "regret in all {} correct rounds={}",
                      early, late, best_rate, correct_rounds, sleeping_zero)};
}

Outcome degeneration() {
  SimConfig cfg;
  cfg.horizon_ms = 30'000;
  cfg.cell.mtd_count = 80;
  cfg.ra.slots_per_opportunity = 2;
  AppConfig app;
  app.profile.period_ms = 700;
  app.profile.jitter_ms = 20;
  cfg.traffic.apps.push_back(app);
  cfg.traffic.events.rate_per_ms = 0.0005;
  cfg.traffic.events.topology = Topology::kStar;
  cfg.traffic.events.nodes = 6;
  cfg.traffic.events.trigger_prob = 0.7;
  cfg.fug.grant_wait_ms = 0;
  cfg.fug.budget = 0;
  cfg.scheme = Scheme::kCoordinated;
  sim::StringTraceSink coord(sim::TraceLevel::kFull), fug(sim::TraceLevel::kFull);
  RunOptions oc, of;
  oc.trace = &coord;
  of.trace = &fug;
  const auto rc = keep(run(cfg, 10, oc));
  cfg.scheme = Scheme::kFug;
  const auto rf = keep(run(cfg, 10, of));
  const bool same = coord.text() == fug.text() && rc.delivered == rf.delivered && rf.grants == 0;
  return {same, fmt::format("{} trace records each, identical={}, fug grants {}", coord.records(),
                            coord.text() == fug.text(), rf.grants)};
}

Outcome conservation() {
  std::size_t bad = 0, mtds = 0;
  for (const auto& r : g_reports) {
    if (r.generated != r.delivered + r.dropped + r.residual) ++bad;
    for (const auto& m : r.per_mtd) {
      ++mtds;
      if (!m.conserved()) ++bad;
    }
  }
  return {bad == 0 && !g_reports.empty(),
          fmt::format("{} reports, {} per-MTD rows, {} violations", g_reports.size(), mtds, bad)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"determinism", determinism},
      {"collision-analytics", collision_analytics},
      {"scheme-comparison", table_reproduction},
      {"acb-binomial", acb_binomial},
      {"nhpp-exponential", nhpp_ks},
      {"periodic-predictor", periodic_predictor},
      {"causality-direction", causality_direction},
      {"cascade-prediction", cascade_prediction},
      {"bandit-regret", bandit_regret},
      {"degeneration", degeneration},
      {"conservation", conservation},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += o.pass ? 0 : 1;
    std::cout << fmt::format("{} {} {}: {} [{:.1f} s]", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail,
                             secs)
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
