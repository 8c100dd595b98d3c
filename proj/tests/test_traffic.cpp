#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "fastgrant/traffic/traffic.hpp"
#include "stats.hpp"

using namespace fastgrant;
using namespace fastgrant::traffic;

TEST_CASE("constant-rate nhpp count mean matches lambda*T within 3 SE") {
  const double lambda = 0.02;
  const Millis horizon = 1000;
  sim::RngStream rng(1, "nhpp");
  std::vector<double> counts;
  for (int rep = 0; rep < 10'000; ++rep) {
    counts.push_back(static_cast<double>(sample_nhpp([&](double) { return lambda; }, lambda, horizon, rng).size()));
  }
  const double expected = lambda * horizon;
  // Poisson: variance = mean.
  const double se = std::sqrt(expected / counts.size());
  CHECK(std::abs(teststats::mean(counts) - expected) < 3 * se);
}

TEST_CASE("zero-rate nhpp is empty and support restriction holds") {
  sim::RngStream rng(2, "nhpp");
  CHECK(sample_nhpp([](double) { return 0.0; }, 0.0, 10'000, rng).empty());
  const auto ts = sample_nhpp([](double t) { return (t >= 300 && t < 700) ? 0.05 : 0.0; }, 0.05, 1000, rng);
  CHECK_FALSE(ts.empty());
  for (double t : ts) {
    CHECK(t >= 300);
    CHECK(t < 700);
  }
  CHECK_THROWS_AS(sample_nhpp([](double) { return 2.0; }, 1.0, 100, rng), std::domain_error);
}

TEST_CASE("zero-jitter periodic train is exact") {
  PeriodicProfile p;
  p.period_ms = 100;
  p.phase_ms = 7;
  sim::RngStream rng(1, "app");
  const auto a = gen_periodic_arrivals(p, 1000, rng);
  REQUIRE(a.size() == 10);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].t == 7 + 100 * static_cast<Millis>(k));
}

TEST_CASE("jittered arrivals stay within the jitter of nominal") {
  PeriodicProfile p;
  p.period_ms = 100;
  p.phase_ms = 50;
  p.jitter_ms = 5;
  sim::RngStream rng(3, "app");
  const auto a = gen_periodic_arrivals(p, 100'000, rng);
  CHECK(a.size() >= 999);
  bool moved = false;
  for (const auto& x : a) {
    const Millis k = (x.t - 50 + 50) / 100;
    const Millis nominal = 50 + 100 * k;
    CHECK(std::abs(x.t - nominal) <= 5);
    moved = moved || x.t != nominal;
  }
  CHECK(moved);
}

TEST_CASE("two apps on one MTD interleave both trains") {
  PeriodicProfile fast, slow;
  fast.app_id = 0;
  fast.period_ms = 50;
  slow.app_id = 1;
  slow.period_ms = 300;
  slow.phase_ms = 10;
  sim::RngStream r1(1, "a"), r2(1, "b");
  auto a = gen_periodic_arrivals(fast, 1200, r1);
  auto b = gen_periodic_arrivals(slow, 1200, r2);
  std::vector<Millis> merged;
  for (auto& x : a) merged.push_back(x.t);
  for (auto& x : b) merged.push_back(x.t);
  std::sort(merged.begin(), merged.end());
  CHECK(merged.size() == 24 + 4);
  CHECK(std::count(merged.begin(), merged.end(), 310) == 1);
  CHECK(std::count(merged.begin(), merged.end(), 300) == 1);
}

TEST_CASE("profile validation") {
  PeriodicProfile p;
  p.period_ms = 100;
  p.phase_ms = 100;
  CHECK_THROWS(p.validate());
  p.phase_ms = 0;
  p.jitter_ms = 50;
  CHECK_THROWS(p.validate());
  p.jitter_ms = 49;
  CHECK_NOTHROW(p.validate());
  p.mode = ArrivalMode::kNhpp;
  CHECK_THROWS(p.validate());
}

namespace {

EventModel chain(int nodes, Millis delay, double prob) {
  EventModel m;
  for (int i = 0; i + 1 < nodes; ++i) {
    m.edges.push_back({static_cast<MtdId>(i), static_cast<MtdId>(i + 1), delay, prob});
  }
  m.epicenter_rule = EpicenterRule::kFixed;
  m.fixed_epicenter = 0;
  return m;
}

}  // namespace

TEST_CASE("deterministic chain activates every 2 ms") {
  sim::RngStream rng(1, "ev");
  const auto acts = propagate_event(chain(6, 2, 1.0), 0, 1000, rng);
  REQUIRE(acts.size() == 6);
  for (std::size_t i = 0; i < acts.size(); ++i) {
    CHECK(acts[i].mtd == i);
    CHECK(acts[i].t == 1000 + 2 * static_cast<Millis>(i));
  }
}

TEST_CASE("zero trigger probability leaves only the epicenter") {
  sim::RngStream rng(1, "ev");
  const auto acts = propagate_event(chain(6, 2, 0.0), 0, 50, rng);
  REQUIRE(acts.size() == 1);
  CHECK(acts[0] == Activation{0, 50});
}

TEST_CASE("star with trigger_prob 0.6 activates 3 leaves on average") {
  EventModel m;
  for (MtdId leaf = 1; leaf <= 5; ++leaf) m.edges.push_back({0, leaf, 1, 0.6});
  sim::RngStream rng(5, "star");
  std::vector<double> leaves;
  for (int i = 0; i < 10'000; ++i) leaves.push_back(static_cast<double>(propagate_event(m, 0, 0, rng).size() - 1));
  // Binomial(5, 0.6): mean 3, variance 1.2.
  const double se = std::sqrt(1.2 / leaves.size());
  CHECK(std::abs(teststats::mean(leaves) - 3.0) < 3 * se);
}

TEST_CASE("event schedule onsets are Poisson and activations stay in the horizon") {
  auto m = chain(4, 30, 1.0);
  m.event_rate_per_ms = 0.001;
  std::vector<Position> pos(4);
  sim::RngStream rng(8, "events");
  const auto eps = gen_event_schedule(m, pos, 1'000'000, rng);
  // 1000 expected onsets, sd ~31.6.
  CHECK(std::abs(static_cast<double>(eps.size()) - 1000.0) < 4 * std::sqrt(1000.0));
  for (std::size_t i = 0; i < eps.size(); ++i) {
    CHECK(eps[i].event_id == i);
    CHECK(eps[i].epicenter == 0);
    for (const auto& a : eps[i].activations) CHECK(a.t < 1'000'000);
  }
}

TEST_CASE("spatial-disk epicenter picks the nearest participant in range") {
  EventModel m;
  m.event_rate_per_ms = 0.01;
  m.epicenter_rule = EpicenterRule::kSpatialDisk;
  m.disk_radius_m = 1e6;
  m.cell_radius_m = 500;
  std::vector<Position> pos{{-400, 0}, {400, 0}};
  sim::RngStream rng(4, "events");
  const auto eps = gen_event_schedule(m, pos, 10'000, rng);
  REQUIRE_FALSE(eps.empty());
  int left = 0;
  for (const auto& e : eps) left += e.epicenter == 0 ? 1 : 0;
  CHECK(left > 0);
  CHECK(left < static_cast<int>(eps.size()));
}

TEST_CASE("packets carry deadline and value from qos") {
  QosSpec q{40, 2.5};
  const auto p = make_packet(3, 1, PacketSource::kEvent, 9, 100, 2, q);
  CHECK(p.deadline == 140);
  CHECK(p.value == 2.5);
  CHECK(p.state == PacketState::kPending);
}

TEST_CASE("positions fall inside the cell") {
  sim::RngStream rng(1, "pos");
  for (int i = 0; i < 1000; ++i) {
    const auto p = sample_position(500, rng);
    CHECK(p.x * p.x + p.y * p.y <= 500.0 * 500.0);
  }
}
