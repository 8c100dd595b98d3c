#include "fastgrant/sched/qlearning.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace fastgrant::sched {

int encode_state(std::size_t available, Millis min_urgency_ms) {
  int count = 0;
  if (available == 0) {
    count = 0;
  } else if (available <= 5) {
    count = 1;
  } else if (available <= 20) {
    count = 2;
  } else {
    count = 3;
  }
  int urgency = 2;
  if (min_urgency_ms <= 5) {
    urgency = 0;
  } else if (min_urgency_ms <= 20) {
    urgency = 1;
  }
  return count * kUrgencyBuckets + urgency;
}

int encode_state(const AvailabilitySet& avail) {
  Millis min_urgency = std::numeric_limits<Millis>::max();
  for (const auto& a : avail.arms) min_urgency = std::min(min_urgency, a.urgency_ms);
  return encode_state(avail.arms.size(), min_urgency);
}

QTable::QTable(QParams params, int states, int actions)
    : params_(params), states_(states), actions_(actions),
      q_(static_cast<std::size_t>(states * actions), 0.0) {
  if (states < 1 || actions < 1) throw std::invalid_argument("Q table needs states and actions");
}

double QTable::value(int state, int action) const {
  if (state < 0 || state >= states_ || action < 0 || action >= actions_) {
    throw std::out_of_range("Q table index out of range");
  }
  return q_[static_cast<std::size_t>(state * actions_ + action)];
}

double QTable::best_value(int state) const {
  double best = value(state, 0);
  for (int a = 1; a < actions_; ++a) best = std::max(best, value(state, a));
  return best;
}

int QTable::greedy(int state) const {
  int best = 0;
  for (int a = 1; a < actions_; ++a) {
    if (value(state, a) > value(state, best)) best = a;
  }
  return best;
}

int QTable::choose(int state, sim::RngStream& rng) const {
  if (rng.uniform() < params_.epsilon) {
    return static_cast<int>(rng.uniform_int(0, actions_ - 1));
  }
  return greedy(state);
}

void QTable::q_step(int state, int action, double reward, int next_state) {
  const double current = value(state, action);
  const double target = reward + params_.gamma * best_value(next_state);
  q_[static_cast<std::size_t>(state * actions_ + action)] = current + params_.alpha * (target - current);
}

}  // namespace fastgrant::sched
