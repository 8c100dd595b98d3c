#include <doctest.h>

#include <stdexcept>

#include <map>
#include <sstream>

#include <json.hpp>

#include "fastgrant/harness/simulation.hpp"
#include "fastgrant/sim/event_queue.hpp"
#include "fastgrant/sim/rng.hpp"
#include "fastgrant/sim/trace.hpp"
#include "stats.hpp"

using namespace fastgrant;
using namespace fastgrant::sim;

TEST_CASE("same-tick events pop by kind rank, then entity, then insertion") {
  SimClock clock(100);
  EventQueue q(clock);
  q.schedule({5, EventKind::kRaOpportunity, 0, 0, 0});
  q.schedule({5, EventKind::kPacketArrival, 3, 0, 0});
  q.schedule({5, EventKind::kPacketArrival, 1, 0, 7});
  q.schedule({5, EventKind::kPacketArrival, 1, 0, 8});
  q.schedule({4, EventKind::kDeadlineCheck, 9, 0, 0});
  std::vector<std::pair<EventKind, std::uint64_t>> order;
  while (!q.empty()) {
    auto e = q.pop();
    order.emplace_back(e.kind, e.value);
  }
  REQUIRE(order.size() == 5);
  CHECK(order[0].first == EventKind::kDeadlineCheck);
  CHECK(order[1] == std::make_pair(EventKind::kPacketArrival, std::uint64_t{7}));
  CHECK(order[2] == std::make_pair(EventKind::kPacketArrival, std::uint64_t{8}));
  CHECK(order[3].first == EventKind::kPacketArrival);
  CHECK(order[4].first == EventKind::kRaOpportunity);
}

TEST_CASE("event scheduled at now fires this tick after lower-rank events already queued") {
  SimClock clock(100);
  EventQueue q(clock);
  q.schedule({10, EventKind::kPacketArrival, 0, 0, 1});
  q.schedule({10, EventKind::kGrantInterval, 0, 0, 2});
  auto first = q.pop();
  clock.advance_to(first.fire_at);
  q.schedule({10, EventKind::kGrantInterval, 0, 0, 3});
  CHECK(q.pop().value == 2);
  CHECK(q.pop().value == 3);
}

TEST_CASE("scheduling in the past throws") {
  SimClock clock(100);
  EventQueue q(clock);
  clock.advance_to(10);
  CHECK_THROWS_AS(q.schedule({9, EventKind::kPacketArrival, 0, 0, 0}), std::logic_error);
  CHECK_THROWS_AS(clock.advance_to(5), std::logic_error);
}

TEST_CASE("rng substreams are reproducible and independent") {
  RngStream a(42, "mtd-7");
  RngStream b(42, "mtd-7");
  RngStream c(42, "mtd-8");
  RngStream d(42, "mtd-7", 1);
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
  CHECK(x != d());
}

TEST_CASE("exponential draws have mean 1/rate within 1%") {
  RngStream rng(7, "exp");
  const double rate = 0.25;
  double sum = 0;
  const int n = 1'000'000;
  for (int i = 0; i < n; ++i) sum += rng.exponential(rate);
  CHECK(sum / n == doctest::Approx(1.0 / rate).epsilon(0.01));
  CHECK_THROWS(rng.exponential(0.0));
}

TEST_CASE("uniform draws pass KS against U(0,1) at 1%") {
  RngStream rng(11, "ks");
  std::vector<double> xs(100'000);
  for (auto& x : xs) {
    x = rng.uniform();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
  }
  const double d = teststats::ks_statistic(xs, [](double v) { return v; });
  CHECK(d < teststats::ks_critical_1pct(xs.size()));
}

TEST_CASE("uniform_int covers the closed range evenly") {
  RngStream rng(3, "int");
  std::map<std::int64_t, int> counts;
  for (int i = 0; i < 60'000; ++i) counts[rng.uniform_int(-2, 3)]++;
  REQUIRE(counts.size() == 6);
  double chi2 = 0;
  for (const auto& [v, c] : counts) chi2 += (c - 10'000.0) * (c - 10'000.0) / 10'000.0;
  CHECK(chi2 < teststats::chi2_critical(5, 0.01));
}

TEST_CASE("trace records have a fixed key order") {
  StringTraceSink sink(TraceLevel::kAccess);
  sink.record(12, MtdId{3}, "ra-attempt", R"({"slot":1})");
  sink.record(13, std::nullopt, "grant-broadcast", R"({"grants":0})");
  CHECK(sink.text() ==
        "{\"t_ms\":12,\"mtd_id\":3,\"event_kind\":\"ra-attempt\",\"detail\":{\"slot\":1}}\n"
        "{\"t_ms\":13,\"mtd_id\":null,\"event_kind\":\"grant-broadcast\",\"detail\":{\"grants\":0}}\n");
  CHECK(sink.records() == 2);
  CHECK(sink.enabled(TraceLevel::kAccess));
  CHECK_FALSE(sink.enabled(TraceLevel::kFull));
}

namespace {

harness::SimConfig small_config(harness::Scheme scheme, int mtds, Millis horizon) {
  harness::SimConfig cfg;
  cfg.scheme = scheme;
  cfg.horizon_ms = horizon;
  cfg.cell.mtd_count = mtds;
  cfg.ra.slots_per_opportunity = 4;
  harness::AppConfig app;
  app.profile.period_ms = 500;
  app.profile.jitter_ms = 5;
  cfg.traffic.apps.push_back(app);
  return cfg;
}

}  // namespace

TEST_CASE("zero MTDs gives an all-zero report") {
  auto cfg = small_config(harness::Scheme::kFug, 0, 1000);
  const auto r = harness::run(cfg, 1);
  for (const auto& [name, v] : r.scalars()) {
    INFO(name);
    CHECK(v == 0.0);
  }
}

TEST_CASE("identical config and seed give byte-identical traces") {
  for (auto scheme : {harness::Scheme::kCoordinated, harness::Scheme::kUncoordinated, harness::Scheme::kFug}) {
    auto cfg = small_config(scheme, 40, 5000);
    StringTraceSink a(TraceLevel::kFull), b(TraceLevel::kFull);
    harness::RunOptions oa, ob;
    oa.trace = &a;
    ob.trace = &b;
    const auto ra = harness::run(cfg, 9, oa);
    const auto rb = harness::run(cfg, 9, ob);
    CHECK(a.text() == b.text());
    CHECK(ra.to_json() == rb.to_json());
    CHECK(a.records() > 0);
  }
}

TEST_CASE("fug run conserves packets, checked by summing the trace") {
  auto cfg = small_config(harness::Scheme::kFug, 100, 60'000);
  cfg.traffic.apps[0].profile.period_ms = 1000;
  StringTraceSink sink(TraceLevel::kFull);
  harness::RunOptions opts;
  opts.trace = &sink;
  const auto r = harness::run(cfg, 5, opts);
  std::map<std::string, std::uint64_t> kinds;
  std::istringstream in(sink.text());
  std::string line;
  while (std::getline(in, line)) kinds[nlohmann::json::parse(line).at("event_kind").get<std::string>()]++;
  CHECK(kinds["packet-arrival"] == r.generated);
  CHECK(kinds["packet-delivered"] == r.delivered);
  CHECK(kinds["packet-dropped"] == r.dropped);
  CHECK(kinds["packet-residual"] == r.residual);
  CHECK(r.generated == r.delivered + r.dropped + r.residual);
  CHECK(r.conserved());
}
