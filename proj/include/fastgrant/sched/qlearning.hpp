#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fastgrant/sched/bandit.hpp"
#include "fastgrant/sim/rng.hpp"

namespace fastgrant::sched {

inline constexpr int kCountBuckets = 4;
inline constexpr int kUrgencyBuckets = 3;
inline constexpr int kQStates = kCountBuckets * kUrgencyBuckets;

/// Meta-policies the Q-learner chooses between.
enum class QAction : std::uint8_t { kEdf = 0, kTopMean = 1, kRoundRobin = 2 };
inline constexpr int kQActions = 3;

/// count in {0, 1-5, 6-20, >20} x min urgency in {<=5, <=20, >20} ms.
int encode_state(std::size_t available, Millis min_urgency_ms);
int encode_state(const AvailabilitySet& avail);

struct QParams {
  double alpha = 0.1;
  double gamma = 0.9;
  double epsilon = 0.1;
};

class QTable {
 public:
  explicit QTable(QParams params = {}, int states = kQStates, int actions = kQActions);

  double value(int state, int action) const;
  double best_value(int state) const;
  /// Greedy action, lowest index on ties.
  int greedy(int state) const;
  /// epsilon-greedy over actions; always consumes one coin draw.
  int choose(int state, sim::RngStream& rng) const;
  const QParams& params() const { return params_; }
  int states() const { return states_; }
  int actions() const { return actions_; }

  /// Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a)).
  /// Throws std::out_of_range for states or actions outside the table.
  void q_step(int state, int action, double reward, int next_state);

  /// Pending transition of the scheduler loop.
  int last_state = -1;
  int last_action = -1;

 private:
  QParams params_;
  int states_;
  int actions_;
  std::vector<double> q_;
};

}  // namespace fastgrant::sched
