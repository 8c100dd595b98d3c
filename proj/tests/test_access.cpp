#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <numeric>

#include "fastgrant/access/access.hpp"
#include "stats.hpp"

using namespace fastgrant;
using namespace fastgrant::access;

namespace {

std::vector<MtdId> ids(int n) {
  std::vector<MtdId> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), MtdId{0});
  return v;
}

// Per-contender success chance with N contenders on K uniformly chosen slots.
double slotted_success(int n, int k) { return std::pow(1.0 - 1.0 / k, n - 1); }

}  // namespace

TEST_CASE("acb extremes") {
  sim::RngStream rng(1, "acb");
  const auto c = ids(50);
  CHECK(acb_filter(c, 1.0, rng).allowed.size() == 50);
  CHECK(acb_filter(c, 0.0, rng).barred.size() == 50);
  CHECK_THROWS(acb_filter(c, 1.5, rng));
}

TEST_CASE("acb at 0.5 over 1000 contenders concentrates within 3 sd") {
  sim::RngStream rng(2, "acb");
  const auto c = ids(1000);
  int inside = 0;
  const double sd = std::sqrt(1000 * 0.25);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto r = acb_filter(c, 0.5, rng);
    CHECK(r.allowed.size() + r.barred.size() == 1000);
    inside += std::abs(static_cast<double>(r.allowed.size()) - 500.0) <= 3 * sd ? 1 : 0;
  }
  CHECK(inside >= 990);
}

TEST_CASE("eab partitions by class") {
  std::vector<Contender> c{{0, 0}, {1, 1}, {2, 0}, {3, 1}};
  CHECK(eab_filter(c, {}).allowed.size() == 4);
  CHECK(eab_filter(c, {1}).barred == std::vector<MtdId>{1, 3});
  CHECK(eab_filter(c, {1}).allowed == std::vector<MtdId>{0, 2});
  std::vector<Contender> zeros{{0, 0}, {1, 0}};
  CHECK(eab_filter(zeros, {0}).barred.size() == 2);
}

TEST_CASE("single contender always succeeds, two on one slot always collide") {
  RaConfig cfg;
  cfg.slots_per_opportunity = 3;
  sim::RngStream rng(1, "ra");
  for (int i = 0; i < 100; ++i) {
    const auto o = ra_opportunity(ids(1), cfg, rng);
    CHECK(o[0].result == AccessResult::kSuccess);
    CHECK(o[0].signaling_rb_units == 6);
  }
  cfg.slots_per_opportunity = 1;
  const auto o = ra_opportunity(ids(2), cfg, rng);
  CHECK(o[0].result == AccessResult::kCollidedBarred);
  CHECK(o[1].result == AccessResult::kCollidedBarred);
}

TEST_CASE("N=30, K=10 success probability matches the analytic value") {
  RaConfig cfg;
  cfg.slots_per_opportunity = 10;
  sim::RngStream rng(3, "ra");
  const auto c = ids(30);
  const int opportunities = 100'000;
  std::uint64_t success = 0;
  for (int i = 0; i < opportunities; ++i) {
    const auto o = ra_opportunity(c, cfg, rng);
    success += o[0].result == AccessResult::kSuccess ? 1 : 0;
  }
  const double p = slotted_success(30, 10);
  CHECK(p == doctest::Approx(0.0471).epsilon(0.01));
  const double se = std::sqrt(p * (1 - p) / opportunities);
  CHECK(std::abs(static_cast<double>(success) / opportunities - p) < 3 * se);
}

TEST_CASE("capture decodes one occupant of a shared slot") {
  RaConfig cfg;
  cfg.slots_per_opportunity = 1;
  cfg.capture_prob = 1.0;
  sim::RngStream rng(1, "ra");
  const auto o = ra_opportunity(ids(4), cfg, rng);
  int ok = 0;
  for (const auto& x : o) ok += x.result == AccessResult::kSuccess ? 1 : 0;
  CHECK(ok == 1);
}

TEST_CASE("handshake completes after the summed delays") {
  RaConfig cfg;
  CHECK(handshake_complete_time(10, cfg) == 16);
  cfg.handshake = {0, 0, 0};
  CHECK(handshake_complete_time(10, cfg) == 10);
}

TEST_CASE("opportunity grid") {
  CHECK(next_opportunity_at_or_after(0, 5) == 0);
  CHECK(next_opportunity_at_or_after(1, 5) == 5);
  CHECK(next_opportunity_at_or_after(10, 5) == 10);
  CHECK_THROWS(next_opportunity_at_or_after(1, 0));
}

TEST_CASE("backoff with zero window retries at the next opportunity") {
  RaConfig cfg;
  cfg.backoff_window_ms = 0;
  sim::RngStream rng(1, "bo");
  RaAttemptState st;
  CHECK(backoff_schedule(st, 10, cfg, rng) == 15);
  CHECK(st.attempts == 1);
}

TEST_CASE("backoff window 20 on the 5 ms grid lands on next..next+4") {
  RaConfig cfg;
  cfg.backoff_window_ms = 20;
  cfg.max_attempts = 1'000'000;
  sim::RngStream rng(2, "bo");
  RaAttemptState st;
  std::map<Millis, int> seen;
  for (int i = 0; i < 5000; ++i) {
    const auto t = backoff_schedule(st, 100, cfg, rng);
    REQUIRE(t);
    seen[*t]++;
  }
  // U in [0,20] maps to opportunities 105 (U<=5) .. 120 (U>15).
  for (const auto& [t, c] : seen) {
    CHECK(t >= 105);
    CHECK(t <= 125);
    CHECK(t % 5 == 0);
  }
  CHECK(seen.size() >= 4);
}

TEST_CASE("backoff exhausts after max_attempts") {
  RaConfig cfg;
  cfg.max_attempts = 3;
  sim::RngStream rng(1, "bo");
  RaAttemptState st;
  CHECK(backoff_schedule(st, 0, cfg, rng));
  CHECK(backoff_schedule(st, 5, cfg, rng));
  CHECK_FALSE(backoff_schedule(st, 10, cfg, rng));
  CHECK(st.exhausted);
}

TEST_CASE("slotted assignment round-robins over ids") {
  RaConfig cfg;
  cfg.slots_per_opportunity = 2;
  const auto a = slotted_ra_assignment(ids(4), cfg);
  CHECK(a.cycle_length() == 2);
  CHECK(a.owns(0, 0));
  CHECK(a.owns(1, 0));
  CHECK(a.owns(2, 1));
  CHECK(a.owns(3, 1));
  CHECK_FALSE(a.owns(2, 0));
  CHECK(a.owns(0, 2));
  CHECK(a.assigned_slots(0) == 2);
  const auto three = slotted_ra_assignment(ids(3), cfg);
  CHECK(three.assigned_slots(1) == 1);
}

TEST_CASE("3000 MTDs on 2 slots every 20 ms wait up to 30 s") {
  RaConfig cfg;
  cfg.slots_per_opportunity = 2;
  cfg.periodicity_ms = 20;
  const auto a = slotted_ra_assignment(ids(3000), cfg);
  CHECK(a.cycle_length() == 1500);
  CHECK(static_cast<Millis>(a.cycle_length()) * cfg.periodicity_ms == 30'000);
}

TEST_CASE("uncoordinated round") {
  sim::RngStream rng(1, "unc");
  CHECK(uncoordinated_round(ids(1), 7, rng)[0].delivered);
  CHECK_THROWS(uncoordinated_round(ids(1), 0, rng));
}

TEST_CASE("uncoordinated N=200, K=50 delivers 200*(49/50)^199 per round") {
  sim::RngStream rng(9, "unc");
  const auto c = ids(200);
  const int rounds = 20'000;
  std::vector<double> per_round;
  for (int r = 0; r < rounds; ++r) {
    const auto res = uncoordinated_round(c, 50, rng);
    double d = 0;
    for (const auto& x : res) d += x.delivered ? 1 : 0;
    per_round.push_back(d);
  }
  const double expected = 200 * slotted_success(200, 50);
  CHECK(expected == doctest::Approx(3.6).epsilon(0.02));
  CHECK(std::abs(teststats::mean(per_round) - expected) < 3 * teststats::std_error(per_round));
}

TEST_CASE("uplink frame carves RA RBs on opportunity ticks") {
  UplinkFrame f{50, 12};
  CHECK(f.data_rbs(true) == 38);
  CHECK(f.data_rbs(false) == 50);
}
