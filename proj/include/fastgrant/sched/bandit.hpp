#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fastgrant/sim/rng.hpp"
#include "fastgrant/sim/types.hpp"

namespace fastgrant::sched {

enum class Policy : std::uint8_t {
  kOracle,
  kRoundRobin,
  kEdf,
  kEpsGreedy,
  kSleepingUcb,
  kQLearning,
};

std::string_view to_string(Policy p);
std::optional<Policy> parse_policy(std::string_view text);

struct ArmInfo {
  MtdId mtd = 0;
  Millis urgency_ms = 0;
  int expected_size_rbs = 1;
};

/// The arms awake this round, sorted by id.
struct AvailabilitySet {
  std::uint64_t round = 0;
  std::vector<ArmInfo> arms;
};

struct ArmStats {
  std::uint64_t pulls = 0;
  double reward_sum = 0.0;
  double mean() const { return pulls == 0 ? 0.0 : reward_sum / static_cast<double>(pulls); }
};

struct BanditParams {
  double epsilon = 0.1;
  bool epsilon_decay = false;
  double ucb_c = 1.4142135623730951;
  double reward_max = 1.0;
};

class QTable;

/// Per-arm statistics plus the per-round bookkeeping shared by all policies.
class BanditState {
 public:
  explicit BanditState(BanditParams params = {}) : params_(params) {}

  const BanditParams& params() const { return params_; }
  std::uint64_t round() const { return round_; }
  const ArmStats& arm(MtdId mtd) const;
  const std::map<MtdId, ArmStats>& arms() const { return arms_; }

  /// Starts a new round; called by select_grants.
  void begin_round(std::span<const MtdId> chosen);
  bool chosen_this_round(MtdId mtd) const;

  /// Incremental-mean update of an arm chosen this round, at most once per
  /// round. Throws std::logic_error otherwise.
  void update(MtdId mtd, double reward);

  /// Round-robin cursor: last id granted.
  std::optional<MtdId> rr_cursor;

 private:
  BanditParams params_;
  std::uint64_t round_ = 0;
  std::map<MtdId, ArmStats> arms_;
  std::map<MtdId, bool> pending_;
};

/// Ground-truth expected reward per arm, used by the oracle policy and the
/// regret trace only.
using TrueMeans = std::map<MtdId, double>;

struct SelectContext {
  /// Required for Policy::kOracle.
  const TrueMeans* true_means = nullptr;
  /// Required for Policy::kQLearning; the chosen meta-policy is recorded in
  /// `last_q_action`.
  QTable* qtable = nullptr;
  int last_q_action = -1;
};

/// Picks at most `budget` arms from `avail` and opens a new round.
std::vector<MtdId> select_grants(const AvailabilitySet& avail, int budget, Policy policy,
                                 BanditState& state, sim::RngStream& rng,
                                 SelectContext* ctx = nullptr);

enum class RewardKind : std::uint8_t { kOnTime, kValueWeighted };

std::string_view to_string(RewardKind k);
std::optional<RewardKind> parse_reward_kind(std::string_view text);

struct GrantResult {
  /// At least one packet delivered by its deadline through the grant.
  bool delivered_on_time = false;
  double packet_value = 1.0;
};

/// On-time indicator, scaled by the packet value in value-weighted mode.
double reward(const GrantResult& outcome, RewardKind kind);

struct RegretRow {
  std::uint64_t t = 0;
  double reward_obtained = 0.0;
  double reward_best_available = 0.0;
  double regret = 0.0;
  double cumulative_regret = 0.0;
};

struct RegretTrace {
  std::vector<RegretRow> rows;
  double cumulative() const { return rows.empty() ? 0.0 : rows.back().cumulative_regret; }
};

/// Sleeping regret of one round: the best min(budget, |avail|) available
/// true means minus the true means of the chosen arms.
void regret_update(RegretTrace& trace, std::uint64_t t, const AvailabilitySet& avail,
                   std::span<const MtdId> chosen, int budget, const TrueMeans& true_means);

}  // namespace fastgrant::sched
