#include "fastgrant/sched/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fastgrant/sched/qlearning.hpp"

namespace fastgrant::sched {

std::string_view to_string(Policy p) {
  switch (p) {
    case Policy::kOracle: return "oracle";
    case Policy::kRoundRobin: return "round-robin";
    case Policy::kEdf: return "edf";
    case Policy::kEpsGreedy: return "eps-greedy";
    case Policy::kSleepingUcb: return "sleeping-ucb";
    case Policy::kQLearning: return "q-learning";
  }
  return "?";
}

std::optional<Policy> parse_policy(std::string_view text) {
  for (auto p : {Policy::kOracle, Policy::kRoundRobin, Policy::kEdf, Policy::kEpsGreedy,
                 Policy::kSleepingUcb, Policy::kQLearning}) {
    if (to_string(p) == text) return p;
  }
  return std::nullopt;
}

const ArmStats& BanditState::arm(MtdId mtd) const {
  static const ArmStats kEmpty;
  auto it = arms_.find(mtd);
  return it == arms_.end() ? kEmpty : it->second;
}

void BanditState::begin_round(std::span<const MtdId> chosen) {
  ++round_;
  pending_.clear();
  for (MtdId m : chosen) pending_[m] = true;
}

bool BanditState::chosen_this_round(MtdId mtd) const {
  auto it = pending_.find(mtd);
  return it != pending_.end() && it->second;
}

void BanditState::update(MtdId mtd, double reward) {
  auto it = pending_.find(mtd);
  if (it == pending_.end()) throw std::logic_error("bandit update for an arm not chosen this round");
  if (!it->second) throw std::logic_error("bandit arm updated twice in one round");
  it->second = false;
  auto& a = arms_[mtd];
  a.pulls += 1;
  a.reward_sum += reward;
}

namespace {

std::vector<MtdId> take(std::vector<ArmInfo> arms, std::size_t n) {
  std::vector<MtdId> out;
  for (std::size_t i = 0; i < std::min(n, arms.size()); ++i) out.push_back(arms[i].mtd);
  return out;
}

std::vector<MtdId> pick_edf(std::vector<ArmInfo> arms, std::size_t n) {
  std::stable_sort(arms.begin(), arms.end(), [](const ArmInfo& a, const ArmInfo& b) {
    return a.urgency_ms != b.urgency_ms ? a.urgency_ms < b.urgency_ms : a.mtd < b.mtd;
  });
  return take(std::move(arms), n);
}

std::vector<MtdId> pick_round_robin(const std::vector<ArmInfo>& arms, std::size_t n,
                                    BanditState& state) {
  std::size_t start = 0;
  if (state.rr_cursor) {
    while (start < arms.size() && arms[start].mtd <= *state.rr_cursor) ++start;
    if (start == arms.size()) start = 0;
  }
  std::vector<MtdId> out;
  for (std::size_t i = 0; i < std::min(n, arms.size()); ++i) {
    out.push_back(arms[(start + i) % arms.size()].mtd);
  }
  if (!out.empty()) state.rr_cursor = out.back();
  return out;
}

// Unpulled arms first (by id), then by descending key, ties by id.
template <typename Key>
std::vector<MtdId> pick_top(const std::vector<ArmInfo>& arms, std::size_t n,
                            const BanditState& state, Key key) {
  std::vector<std::pair<double, MtdId>> ranked;
  std::vector<MtdId> unpulled;
  for (const auto& a : arms) {
    const auto& s = state.arm(a.mtd);
    if (s.pulls == 0) {
      unpulled.push_back(a.mtd);
    } else {
      ranked.emplace_back(key(s), a.mtd);
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<MtdId> out;
  for (MtdId m : unpulled) {
    if (out.size() == n) return out;
    out.push_back(m);
  }
  for (const auto& [k, m] : ranked) {
    if (out.size() == n) break;
    out.push_back(m);
  }
  return out;
}

std::vector<MtdId> pick_eps_greedy(const std::vector<ArmInfo>& arms, std::size_t n,
                                   const BanditState& state, std::uint64_t t,
                                   sim::RngStream& rng) {
  const auto& p = state.params();
  const double eps = p.epsilon_decay ? std::min(1.0, p.epsilon / static_cast<double>(t)) : p.epsilon;
  std::vector<ArmInfo> remaining = arms;
  std::vector<MtdId> out;
  while (out.size() < n && !remaining.empty()) {
    std::size_t idx = 0;
    if (rng.uniform() < eps) {
      idx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(remaining.size()) - 1));
    } else {
      const auto best = pick_top(remaining, 1, state, [](const ArmStats& s) { return s.mean(); });
      idx = static_cast<std::size_t>(
          std::find_if(remaining.begin(), remaining.end(),
                       [&](const ArmInfo& a) { return a.mtd == best.front(); }) -
          remaining.begin());
    }
    out.push_back(remaining[idx].mtd);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(idx));
  }
  return out;
}

}  // namespace

std::vector<MtdId> select_grants(const AvailabilitySet& avail, int budget, Policy policy,
                                 BanditState& state, sim::RngStream& rng,
                                 SelectContext* ctx) {
  if (budget < 0) throw std::invalid_argument("grant budget must be >= 0");
  std::vector<ArmInfo> arms = avail.arms;
  std::sort(arms.begin(), arms.end(), [](const ArmInfo& a, const ArmInfo& b) { return a.mtd < b.mtd; });
  const auto n = static_cast<std::size_t>(budget);
  const std::uint64_t t = state.round() + 1;
  std::vector<MtdId> chosen;
  if (n > 0 && !arms.empty()) {
    switch (policy) {
      case Policy::kOracle: {
        if (ctx == nullptr || ctx->true_means == nullptr) {
          throw std::invalid_argument("oracle policy needs true means");
        }
        const auto& tm = *ctx->true_means;
        auto mean_of = [&](MtdId m) {
          auto it = tm.find(m);
          return it == tm.end() ? 0.0 : it->second;
        };
        std::stable_sort(arms.begin(), arms.end(), [&](const ArmInfo& a, const ArmInfo& b) {
          return mean_of(a.mtd) > mean_of(b.mtd);
        });
        chosen = take(arms, n);
        break;
      }
      case Policy::kRoundRobin:
        chosen = pick_round_robin(arms, n, state);
        break;
      case Policy::kEdf:
        chosen = pick_edf(arms, n);
        break;
      case Policy::kEpsGreedy:
        chosen = pick_eps_greedy(arms, n, state, t, rng);
        break;
      case Policy::kSleepingUcb: {
        const double c = state.params().ucb_c;
        const double log_t = std::log(static_cast<double>(t));
        chosen = pick_top(arms, n, state, [&](const ArmStats& s) {
          return s.mean() + c * std::sqrt(log_t / static_cast<double>(s.pulls));
        });
        break;
      }
      case Policy::kQLearning: {
        if (ctx == nullptr || ctx->qtable == nullptr) {
          throw std::invalid_argument("q-learning policy needs a Q table");
        }
        const int s = encode_state(avail);
        const int a = ctx->qtable->choose(s, rng);
        ctx->last_q_action = a;
        switch (static_cast<QAction>(a)) {
          case QAction::kEdf: chosen = pick_edf(arms, n); break;
          case QAction::kTopMean:
            chosen = pick_top(arms, n, state, [](const ArmStats& st) { return st.mean(); });
            break;
          case QAction::kRoundRobin: chosen = pick_round_robin(arms, n, state); break;
        }
        break;
      }
    }
  }
  state.begin_round(chosen);
  return chosen;
}

std::string_view to_string(RewardKind k) {
  return k == RewardKind::kOnTime ? "on-time" : "value-weighted";
}

std::optional<RewardKind> parse_reward_kind(std::string_view text) {
  if (text == "on-time") return RewardKind::kOnTime;
  if (text == "value-weighted") return RewardKind::kValueWeighted;
  return std::nullopt;
}

double reward(const GrantResult& outcome, RewardKind kind) {
  if (!outcome.delivered_on_time) return 0.0;
  return kind == RewardKind::kValueWeighted ? outcome.packet_value : 1.0;
}

void regret_update(RegretTrace& trace, std::uint64_t t, const AvailabilitySet& avail,
                   std::span<const MtdId> chosen, int budget, const TrueMeans& true_means) {
  auto mean_of = [&](MtdId m) {
    auto it = true_means.find(m);
    return it == true_means.end() ? 0.0 : it->second;
  };
  std::vector<double> means;
  for (const auto& a : avail.arms) means.push_back(mean_of(a.mtd));
  std::sort(means.begin(), means.end(), std::greater<>());
  const auto slots = std::min<std::size_t>(static_cast<std::size_t>(std::max(budget, 0)), means.size());
  double best = 0;
  for (std::size_t i = 0; i < slots; ++i) best += means[i];
  double got = 0;
  for (MtdId m : chosen) got += mean_of(m);
  RegretRow row;
  row.t = t;
  row.reward_obtained = got;
  row.reward_best_available = best;
  row.regret = std::max(0.0, best - got);
  row.cumulative_regret = trace.cumulative() + row.regret;
  trace.rows.push_back(row);
}

}  // namespace fastgrant::sched
