#include "fastgrant/predict/periodic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>

namespace fastgrant::predict {

namespace {

Millis floor_mod(Millis a, Millis m) {
  Millis r = a % m;
  return r < 0 ? r + m : r;
}

Millis window_half_width(Millis period, Millis tolerance) {
  return std::min(tolerance, std::max<Millis>(0, (period - 1) / 4));
}

struct Candidate {
  std::vector<std::size_t> members;  // indices into the observation vector
  Millis period = 0;
  Millis phase = 0;
  Millis margin = 0;
  int size = 1;
};

// Densest arc of width 2*tol on the circle of circumference p; returns the
// arc centre and the indices inside it.
std::pair<double, std::vector<std::size_t>> densest_arc(
    const std::vector<Observation>& obs, const std::vector<std::size_t>& pool,
    Millis p, Millis tol) {
  std::vector<std::pair<Millis, std::size_t>> res;
  res.reserve(pool.size());
  for (std::size_t i : pool) res.emplace_back(floor_mod(obs[i].t, p), i);
  std::sort(res.begin(), res.end());
  const std::size_t m = res.size();
  std::size_t best_start = 0, best_count = 0;
  std::size_t end = 0;
  for (std::size_t s = 0; s < m; ++s) {
    if (end < s) end = s;
    auto unwrapped = [&](std::size_t j) {
      return j < m ? res[j].first : res[j - m].first + p;
    };
    while (end + 1 < s + m && unwrapped(end + 1) - res[s].first <= 2 * tol) ++end;
    if (end - s + 1 > best_count) {
      best_count = end - s + 1;
      best_start = s;
    }
  }
  std::vector<std::size_t> members;
  double lo = static_cast<double>(res[best_start].first);
  double hi = lo;
  for (std::size_t j = best_start; j < best_start + best_count; ++j) {
    const auto& r = res[j % m];
    const double v = static_cast<double>(j < m ? r.first : r.first + p);
    hi = std::max(hi, v);
    members.push_back(r.second);
  }
  return {0.5 * (lo + hi), members};
}

double circular_distance(double a, double b, double p) {
  double d = std::fmod(std::fabs(a - b), p);
  return std::min(d, p - d);
}

std::optional<Candidate> evaluate(const std::vector<Observation>& obs,
                                  const std::vector<std::size_t>& pool,
                                  Millis candidate_period,
                                  const PeriodEstimatorConfig& cfg) {
  Millis p = candidate_period;
  Candidate out;
  // Refine: fold with the current period, fit, refold with the fitted period.
  for (int iter = 0; iter < 3; ++iter) {
    const Millis tol = window_half_width(p, cfg.tolerance_ms);
    auto [centre, arc] = densest_arc(obs, pool, p, tol);
    const double pd = static_cast<double>(p);
    // One observation per cycle: the one closest to the arc centre.
    std::map<Millis, std::size_t> per_cycle;
    for (std::size_t i : arc) {
      const double t = static_cast<double>(obs[i].t);
      const auto k = static_cast<Millis>(std::floor((t - centre + pd / 2.0) / pd));
      auto it = per_cycle.find(k);
      const double dist = circular_distance(std::fmod(t, pd), std::fmod(centre, pd), pd);
      if (it == per_cycle.end()) {
        per_cycle[k] = i;
      } else {
        const double other = circular_distance(
            std::fmod(static_cast<double>(obs[it->second].t), pd), std::fmod(centre, pd), pd);
        if (dist < other) it->second = i;
      }
    }
    if (per_cycle.size() < cfg.min_support) return std::nullopt;

    // Least-squares fit of t against the cycle index.
    const double n = static_cast<double>(per_cycle.size());
    double sk = 0, st = 0, skk = 0, skt = 0;
    for (const auto& [k, i] : per_cycle) {
      const double kk = static_cast<double>(k);
      const double t = static_cast<double>(obs[i].t);
      sk += kk;
      st += t;
      skk += kk * kk;
      skt += kk * t;
    }
    const double denom = n * skk - sk * sk;
    if (denom <= 0) return std::nullopt;
    const double slope = (n * skt - sk * st) / denom;
    const double intercept = (st - slope * sk) / n;
    const Millis fitted = static_cast<Millis>(std::llround(slope));
    if (fitted < 1) return std::nullopt;

    double ss = 0;
    for (const auto& [k, i] : per_cycle) {
      const double r = static_cast<double>(obs[i].t) - (intercept + slope * static_cast<double>(k));
      ss += r * r;
    }
    const double sd = std::sqrt(ss / n);
    if (sd / static_cast<double>(fitted) > cfg.max_relative_spread) return std::nullopt;

    out.members.clear();
    for (const auto& [k, i] : per_cycle) out.members.push_back(i);
    out.period = fitted;
    if (fitted == p) break;
    p = fitted;
  }

  // Phase: circular mean of t mod period.
  const double pd = static_cast<double>(out.period);
  double sx = 0, sy = 0, size_sum = 0;
  for (std::size_t i : out.members) {
    const double theta = 2.0 * M_PI * static_cast<double>(floor_mod(obs[i].t, out.period)) / pd;
    sx += std::cos(theta);
    sy += std::sin(theta);
    size_sum += obs[i].size_rbs;
  }
  double angle = std::atan2(sy, sx);
  if (angle < 0) angle += 2.0 * M_PI;
  out.phase = floor_mod(static_cast<Millis>(std::llround(angle * pd / (2.0 * M_PI))), out.period);
  out.margin = 0;
  for (std::size_t i : out.members) {
    const Millis off = floor_mod(obs[i].t - out.phase, out.period);
    out.margin = std::max(out.margin, std::min(off, out.period - off));
  }
  out.size = std::max(1, static_cast<int>(std::lround(size_sum / static_cast<double>(out.members.size()))));
  return out;
}

}  // namespace

Millis PeriodicComponent::next_nominal_at_or_after(Millis t) const {
  const Millis off = floor_mod(t - phase_ms, period_ms);
  return off == 0 ? t : t + (period_ms - off);
}

PeriodicEstimate estimate_periods(std::span<const Observation> observations,
                                  MtdId mtd, const PeriodEstimatorConfig& cfg) {
  PeriodicEstimate est;
  est.mtd = mtd;
  std::vector<Observation> obs;
  for (const auto& o : observations) {
    if (!o.tag) obs.push_back(o);
  }
  if (obs.size() > cfg.max_observations) {
    obs.erase(obs.begin(), obs.end() - static_cast<std::ptrdiff_t>(cfg.max_observations));
  }
  const std::size_t total = obs.size();
  if (total < cfg.min_support || cfg.min_support < 2) return est;

  std::vector<bool> used(total, false);
  while (true) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < total; ++i) {
      if (!used[i]) pool.push_back(i);
    }
    if (pool.size() < cfg.min_support) break;

    std::vector<Millis> all_gaps;
    for (std::size_t a = 0; a < pool.size(); ++a) {
      for (std::size_t b = a + 1; b < pool.size(); ++b) {
        const Millis d = obs[pool[b]].t - obs[pool[a]].t;
        if (d > cfg.max_period_ms) break;
        if (d >= 1) all_gaps.push_back(d);
      }
    }
    if (all_gaps.empty()) break;
    std::sort(all_gaps.begin(), all_gaps.end());
    // Windowed support of each distinct gap.
    std::vector<Millis> keys;
    std::vector<int> prefix{0};
    for (std::size_t i = 0; i < all_gaps.size();) {
      std::size_t k = i;
      while (k < all_gaps.size() && all_gaps[k] == all_gaps[i]) ++k;
      keys.push_back(all_gaps[i]);
      prefix.push_back(prefix.back() + static_cast<int>(k - i));
      i = k;
    }
    std::vector<std::pair<int, Millis>> ranked;
    for (Millis d : keys) {
      const Millis tol = window_half_width(d, cfg.tolerance_ms);
      auto lo = std::lower_bound(keys.begin(), keys.end(), d - tol) - keys.begin();
      auto hi = std::upper_bound(keys.begin(), keys.end(), d + tol) - keys.begin();
      ranked.emplace_back(prefix[static_cast<std::size_t>(hi)] - prefix[static_cast<std::size_t>(lo)], d);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });

    std::optional<Candidate> best;
    std::size_t evaluated = 0;
    for (const auto& [weight, d] : ranked) {
      if (weight + 1 < static_cast<int>(cfg.min_support)) break;
      if (evaluated++ >= cfg.max_candidates) break;
      auto c = evaluate(obs, pool, d, cfg);
      if (!c) continue;
      if (!best || c->members.size() > best->members.size() ||
          (c->members.size() == best->members.size() && c->period < best->period)) {
        best = std::move(c);
      }
    }
    if (!best) break;
    for (std::size_t i : best->members) used[i] = true;
    PeriodicComponent comp;
    comp.period_ms = best->period;
    comp.phase_ms = best->phase;
    comp.size_rbs = best->size;
    comp.margin_ms = best->margin;
    comp.support = best->members.size();
    comp.confidence = static_cast<double>(comp.support) / static_cast<double>(total);
    est.components.push_back(comp);
  }
  std::stable_sort(est.components.begin(), est.components.end(),
                   [](const PeriodicComponent& a, const PeriodicComponent& b) {
                     return a.confidence > b.confidence;
                   });
  return est;
}

PeriodicEstimate estimate_periods(const TxHistory& history, MtdId mtd,
                                  const PeriodEstimatorConfig& cfg) {
  return estimate_periods(history.of(mtd), mtd, cfg);
}

std::string_view to_string(PredictionSource s) {
  return s == PredictionSource::kPeriodic ? "periodic" : "event-cascade";
}

Prediction predict_periodic_active(std::span<const PeriodicEstimate> estimates,
                                   Millis t, Millis lookahead_ms,
                                   double confidence_threshold) {
  if (lookahead_ms < 1) throw std::invalid_argument("lookahead_ms must be >= 1");
  Prediction out;
  out.t = t;
  for (const auto& est : estimates) {
    std::optional<PredictedActivity> entry;
    for (const auto& c : est.components) {
      if (c.confidence < confidence_threshold) continue;
      const Millis n = c.next_nominal_at_or_after(t - c.margin_ms);
      if (n - c.margin_ms > t + lookahead_ms - 1) continue;
      const Millis urgency = n - c.margin_ms + est.max_delay_ms - t;
      if (!entry) {
        entry = PredictedActivity{est.mtd, c.size_rbs, urgency, PredictionSource::kPeriodic, n};
      } else {
        entry->expected_size_rbs += c.size_rbs;
        entry->urgency_ms = std::min(entry->urgency_ms, urgency);
        entry->expected_at = std::min(entry->expected_at, n);
      }
    }
    if (entry) out.predicted_active.push_back(*entry);
  }
  std::sort(out.predicted_active.begin(), out.predicted_active.end(),
            [](const auto& a, const auto& b) { return a.mtd < b.mtd; });
  // Merge duplicates if the caller passed several estimates for one MTD.
  std::vector<PredictedActivity> merged;
  for (const auto& e : out.predicted_active) {
    if (!merged.empty() && merged.back().mtd == e.mtd) {
      merged.back().expected_size_rbs += e.expected_size_rbs;
      merged.back().urgency_ms = std::min(merged.back().urgency_ms, e.urgency_ms);
      merged.back().expected_at = std::min(merged.back().expected_at, e.expected_at);
    } else {
      merged.push_back(e);
    }
  }
  out.predicted_active = std::move(merged);
  return out;
}

}  // namespace fastgrant::predict
