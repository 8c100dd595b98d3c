#include <doctest.h>

#include <stdexcept>

#include <array>
#include <cmath>

#include "fastgrant/sched/bandit.hpp"
#include "fastgrant/sched/qlearning.hpp"

using namespace fastgrant;
using namespace fastgrant::sched;

namespace {

AvailabilitySet arms(std::initializer_list<MtdId> ids) {
  AvailabilitySet a;
  for (MtdId id : ids) a.arms.push_back({id, 10, 1});
  return a;
}

}  // namespace

TEST_CASE("budget 0 picks nothing; negative throws") {
  BanditState st;
  sim::RngStream rng(1, "s");
  for (auto p : {Policy::kRoundRobin, Policy::kEdf, Policy::kEpsGreedy, Policy::kSleepingUcb}) {
    CHECK(select_grants(arms({0, 1}), 0, p, st, rng).empty());
  }
  CHECK_THROWS(select_grants(arms({0}), -1, Policy::kEdf, st, rng));
  CHECK_THROWS(select_grants(arms({0}), 1, Policy::kOracle, st, rng));
  CHECK_THROWS(select_grants(arms({0}), 1, Policy::kQLearning, st, rng));
}

TEST_CASE("sleeping ucb tries an unpulled arm before any pulled one") {
  BanditState st;
  sim::RngStream rng(1, "s");
  auto c = select_grants(arms({0, 1}), 1, Policy::kSleepingUcb, st, rng);
  REQUIRE(c == std::vector<MtdId>{0});
  st.update(0, 1.0);
  c = select_grants(arms({0, 1, 2}), 1, Policy::kSleepingUcb, st, rng);
  CHECK(c == std::vector<MtdId>{1});
}

TEST_CASE("edf orders by urgency then id; round robin cycles") {
  BanditState st;
  sim::RngStream rng(1, "s");
  AvailabilitySet a;
  a.arms = {{0, 30, 1}, {1, 5, 1}, {2, 5, 1}, {3, 1, 1}};
  CHECK(select_grants(a, 3, Policy::kEdf, st, rng) == std::vector<MtdId>{3, 1, 2});
  BanditState rr;
  CHECK(select_grants(a, 2, Policy::kRoundRobin, rr, rng) == std::vector<MtdId>{0, 1});
  CHECK(select_grants(a, 2, Policy::kRoundRobin, rr, rng) == std::vector<MtdId>{2, 3});
  CHECK(select_grants(a, 1, Policy::kRoundRobin, rr, rng) == std::vector<MtdId>{0});
}

TEST_CASE("ucb on Bernoulli(0.9, 0.5, 0.1) settles on the best arm") {
  const std::array<double, 3> means{0.9, 0.5, 0.1};
  BanditState st;
  sim::RngStream rng(3, "ucb");
  sim::RngStream env(3, "env");
  const auto a = arms({0, 1, 2});
  int best_late = 0;
  const int T = 10'000;
  for (int t = 0; t < T; ++t) {
    const auto c = select_grants(a, 1, Policy::kSleepingUcb, st, rng);
    REQUIRE(c.size() == 1);
    st.update(c[0], env.uniform() < means[c[0]] ? 1.0 : 0.0);
    if (t >= T - 1000 && c[0] == 0) ++best_late;
  }
  CHECK(best_late > 900);
}

TEST_CASE("epsilon greedy exploits the best mean most of the time") {
  const std::array<double, 3> means{0.2, 0.8, 0.5};
  BanditState st(BanditParams{0.1, false});
  sim::RngStream rng(4, "eps");
  sim::RngStream env(4, "env");
  const auto a = arms({0, 1, 2});
  int best = 0;
  for (int t = 0; t < 5000; ++t) {
    const auto c = select_grants(a, 1, Policy::kEpsGreedy, st, rng);
    st.update(c[0], env.uniform() < means[c[0]] ? 1.0 : 0.0);
    if (t >= 4000 && c[0] == 1) ++best;
  }
  // Exploitation 0.9 plus a third of exploration.
  CHECK(best > 880);
}

TEST_CASE("reward definitions") {
  CHECK(reward({false, 1.0}, RewardKind::kOnTime) == 0.0);
  CHECK(reward({true, 1.0}, RewardKind::kOnTime) == 1.0);
  CHECK(reward({true, 2.5}, RewardKind::kValueWeighted) == 2.5);
  CHECK(reward({true, 2.5}, RewardKind::kOnTime) == 1.0);
}

TEST_CASE("incremental mean updates") {
  BanditState st;
  sim::RngStream rng(1, "s");
  select_grants(arms({4}), 1, Policy::kEdf, st, rng);
  st.update(4, 0.7);
  CHECK(st.arm(4).mean() == 0.7);
  CHECK(st.arm(4).pulls == 1);
  CHECK_THROWS_AS(st.update(4, 1.0), std::logic_error);
  CHECK_THROWS_AS(st.update(5, 1.0), std::logic_error);

  BanditState s2;
  for (double r : {1.0, 0.0, 1.0}) {
    select_grants(arms({0}), 1, Policy::kEdf, s2, rng);
    s2.update(0, r);
  }
  CHECK(s2.arm(0).mean() == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("10^5 Bernoulli updates land within 3 sd of p") {
  BanditState st;
  sim::RngStream rng(1, "s");
  sim::RngStream env(2, "env");
  const double p = 0.3;
  const int n = 100'000;
  for (int i = 0; i < n; ++i) {
    select_grants(arms({0}), 1, Policy::kEdf, st, rng);
    st.update(0, env.uniform() < p ? 1.0 : 0.0);
  }
  CHECK(std::abs(st.arm(0).mean() - p) < 3 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("sleeping regret is measured against the best available arm") {
  TrueMeans m{{0, 0.9}, {1, 0.5}, {2, 0.1}};
  RegretTrace tr;
  regret_update(tr, 1, arms({0, 1, 2}), std::vector<MtdId>{0}, 1, m);
  CHECK(tr.rows.back().regret == 0.0);
  regret_update(tr, 2, arms({0, 1}), std::vector<MtdId>{1}, 1, m);
  CHECK(tr.rows.back().regret == doctest::Approx(0.4));
  regret_update(tr, 3, arms({1, 2}), std::vector<MtdId>{1}, 1, m);
  CHECK(tr.rows.back().regret == 0.0);
  CHECK(tr.cumulative() == doctest::Approx(0.4));
}

TEST_CASE("oracle policy picks the top true means") {
  TrueMeans m{{0, 0.1}, {1, 0.9}, {2, 0.5}};
  SelectContext ctx;
  ctx.true_means = &m;
  BanditState st;
  sim::RngStream rng(1, "s");
  CHECK(select_grants(arms({0, 1, 2}), 2, Policy::kOracle, st, rng, &ctx) == std::vector<MtdId>{1, 2});
}

TEST_CASE("q-step arithmetic") {
  QTable q(QParams{1.0, 0.0, 0.0}, 2, 2);
  q.q_step(0, 1, 1.0, 1);
  CHECK(q.value(0, 1) == 1.0);
  CHECK(q.greedy(0) == 1);
  CHECK_THROWS_AS(q.q_step(2, 0, 1.0, 0), std::out_of_range);
  CHECK_THROWS_AS(q.value(0, 2), std::out_of_range);
}

TEST_CASE("gamma 0 with i.i.d. rewards converges to the mean") {
  QTable q(QParams{0.01, 0.0, 0.0}, 1, 1);
  sim::RngStream env(5, "env");
  for (int i = 0; i < 10'000; ++i) q.q_step(0, 0, env.uniform() < 0.3 ? 1.0 : 0.0, 0);
  CHECK(q.value(0, 0) == doctest::Approx(0.3).epsilon(0.1));
}

TEST_CASE("two-state chain: q-learning greedy policy matches value iteration") {
  // States {0,1}, actions {stay, move}. Moving flips the state; reward 1 only
  // for moving from 1 to 0, 0.2 for staying in 0.
  auto step = [](int s, int a) -> std::pair<int, double> {
    if (a == 1) return {1 - s, s == 1 ? 1.0 : 0.0};
    return {s, s == 0 ? 0.2 : 0.0};
  };
  const double gamma = 0.9;
  std::array<std::array<double, 2>, 2> v{};
  for (int it = 0; it < 2000; ++it) {
    auto nv = v;
    for (int s = 0; s < 2; ++s) {
      for (int a = 0; a < 2; ++a) {
        auto [n, r] = step(s, a);
        nv[s][a] = r + gamma * std::max(v[n][0], v[n][1]);
      }
    }
    v = nv;
  }
  QTable q(QParams{0.1, gamma, 0.2}, 2, 2);
  sim::RngStream rng(6, "q");
  int s = 0;
  for (int i = 0; i < 10'000; ++i) {
    const int a = q.choose(s, rng);
    auto [n, r] = step(s, a);
    q.q_step(s, a, r, n);
    s = n;
  }
  for (int st = 0; st < 2; ++st) {
    const int oracle = v[st][1] > v[st][0] ? 1 : 0;
    CHECK(q.greedy(st) == oracle);
  }
}

TEST_CASE("state encoding buckets") {
  CHECK(encode_state(0, 100) == 2);
  CHECK(encode_state(3, 5) == 3);
  CHECK(encode_state(6, 20) == 7);
  CHECK(encode_state(21, 21) == 11);
}

TEST_CASE("policy names round-trip") {
  for (auto p : {Policy::kOracle, Policy::kRoundRobin, Policy::kEdf, Policy::kEpsGreedy, Policy::kSleepingUcb,
                 Policy::kQLearning}) {
    CHECK(parse_policy(to_string(p)) == p);
  }
  CHECK_FALSE(parse_policy("greedy"));
}
