#include "fastgrant/predict/events.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace fastgrant::predict {

void EpisodeRecord::activate(MtdId mtd, Millis t) {
  auto it = std::find_if(activations.begin(), activations.end(),
                         [&](const ActivationRecord& a) { return a.mtd == mtd; });
  if (it != activations.end()) {
    if (it->t <= t) return;
    activations.erase(it);
  }
  ActivationRecord rec{mtd, t};
  auto pos = std::upper_bound(activations.begin(), activations.end(), rec,
                              [](const ActivationRecord& a, const ActivationRecord& b) {
                                return a.t != b.t ? a.t < b.t : a.mtd < b.mtd;
                              });
  activations.insert(pos, rec);
}

bool explained_by_periodic(const PeriodicEstimate* estimate, Millis t,
                           const EventDetectorConfig& cfg) {
  if (estimate == nullptr) return false;
  for (const auto& c : estimate->components) {
    if (c.confidence < cfg.confidence_threshold) continue;
    const Millis n = c.next_nominal_at_or_after(t - c.margin_ms - cfg.explain_slack_ms);
    if (n - c.margin_ms <= t && t <= n + c.margin_ms + cfg.explain_slack_ms) return true;
  }
  return false;
}

std::optional<EpisodeId> EventDetector::open_episode(Millis t) const {
  // The most recent episode whose join window still covers t.
  for (auto it = open_.rbegin(); it != open_.rend(); ++it) {
    if (t >= it->second.opened_at && t - it->second.opened_at <= cfg_.window_ms) return it->first;
  }
  return std::nullopt;
}

std::optional<EpisodeId> EventDetector::latest_open() const {
  if (open_.empty()) return std::nullopt;
  return open_.rbegin()->first;
}

std::optional<EventTrigger> EventDetector::detect_event_trigger(
    MtdId mtd, Millis t, const PeriodicEstimate* estimate) {
  if (explained_by_periodic(estimate, t, cfg_)) return std::nullopt;
  if (auto id = open_episode(t)) {
    open_.at(*id).activate(mtd, t);
    return EventTrigger{*id, mtd, t, false};
  }
  EpisodeRecord rec;
  rec.id = next_id_++;
  rec.trigger = mtd;
  rec.opened_at = t;
  rec.activate(mtd, t);
  open_.emplace(rec.id, std::move(rec));
  return EventTrigger{next_id_ - 1, mtd, t, true};
}

void EventDetector::note_activation(EpisodeId id, MtdId mtd, Millis t) {
  auto it = open_.find(id);
  if (it != open_.end()) it->second.activate(mtd, t);
}

void EventDetector::note_packet(EpisodeId id, MtdId mtd, int size_rbs) {
  auto it = open_.find(id);
  if (it == open_.end()) return;
  it->second.packets[mtd] += 1;
  it->second.rbs[mtd] += size_rbs;
}

std::vector<EpisodeRecord> EventDetector::close_expired(Millis now) {
  std::vector<EpisodeRecord> out;
  for (auto it = open_.begin(); it != open_.end();) {
    if (now > it->second.opened_at + cfg_.window_ms + cfg_.report_grace_ms) {
      out.push_back(std::move(it->second));
      it = open_.erase(it);
    } else {
      ++it;
    }
  }
  return out;
}

std::vector<EpisodeRecord> EventDetector::close_all() {
  std::vector<EpisodeRecord> out;
  for (auto& [id, rec] : open_) out.push_back(std::move(rec));
  open_.clear();
  return out;
}

void CausalStats::update_event_stats(const EpisodeRecord& episode) {
  const auto& acts = episode.activations;
  for (const auto& a : acts) {
    trigger_count_[a.mtd] += 1;
    auto p = episode.packets.find(a.mtd);
    packets_[a.mtd] += p == episode.packets.end() ? 0 : p->second;
    auto r = episode.rbs.find(a.mtd);
    rbs_[a.mtd] += r == episode.rbs.end() ? 0 : r->second;
  }
  for (std::size_t i = 0; i < acts.size(); ++i) {
    for (std::size_t j = 0; j < acts.size(); ++j) {
      if (i == j || acts[j].t < acts[i].t) continue;
      const auto key = std::make_pair(acts[i].mtd, acts[j].mtd);
      cooccur_[key] += 1;
      lags_[key].push_back(acts[j].t - acts[i].t);
    }
  }
  episodes_.push_back(episode);
}

int CausalStats::trigger_count(MtdId i) const {
  auto it = trigger_count_.find(i);
  return it == trigger_count_.end() ? 0 : it->second;
}

int CausalStats::cooccur(MtdId i, MtdId j) const {
  auto it = cooccur_.find({i, j});
  return it == cooccur_.end() ? 0 : it->second;
}

std::span<const Millis> CausalStats::lags(MtdId i, MtdId j) const {
  auto it = lags_.find({i, j});
  if (it == lags_.end()) return {};
  return it->second;
}

std::optional<Millis> CausalStats::median_lag(MtdId i, MtdId j) const {
  auto l = lags(i, j);
  if (l.empty()) return std::nullopt;
  std::vector<Millis> v(l.begin(), l.end());
  const std::size_t mid = (v.size() - 1) / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  return v[mid];
}

double CausalStats::mean_packets(MtdId j) const {
  const int n = trigger_count(j);
  if (n == 0) return 0.0;
  auto it = packets_.find(j);
  const double mean = it == packets_.end() ? 0.0 : static_cast<double>(it->second) / n;
  return std::max(1.0, mean);
}

int CausalStats::mean_size_rbs(MtdId j) const {
  const int n = trigger_count(j);
  if (n == 0) return 1;
  auto it = rbs_.find(j);
  const double mean = it == rbs_.end() ? 0.0 : static_cast<double>(it->second) / n;
  return std::max(1, static_cast<int>(std::lround(mean)));
}

std::vector<MtdId> CausalStats::mtds() const {
  std::vector<MtdId> out;
  for (const auto& [id, n] : trigger_count_) out.push_back(id);
  return out;
}

std::map<MtdId, double> CausalStats::coactivation_probability(MtdId trigger,
                                                              bool smoothing) const {
  std::map<MtdId, double> out;
  const int n = trigger_count(trigger);
  if (n == 0) return out;
  for (const auto& [id, cnt] : trigger_count_) {
    if (id == trigger) continue;
    const int c = cooccur(trigger, id);
    out[id] = smoothing ? (c + 1.0) / (n + 2.0) : static_cast<double>(c) / n;
  }
  return out;
}

ActivitySequences build_activity_sequences(std::span<const EpisodeRecord> episodes,
                                           const SequenceConfig& cfg) {
  if (cfg.bin_ms < 1) throw std::invalid_argument("bin_ms must be >= 1");
  ActivitySequences out;
  std::set<MtdId> ids;
  for (const auto& ep : episodes) {
    for (const auto& a : ep.activations) ids.insert(a.mtd);
  }
  for (MtdId id : ids) out.per_mtd[id];
  for (const auto& ep : episodes) {
    if (ep.activations.empty()) continue;
    const Millis start = std::min(ep.opened_at, ep.activations.front().t);
    const Millis last = ep.activations.back().t;
    const auto bins = static_cast<std::size_t>((last - start) / cfg.bin_ms + 1 + cfg.tail_bins);
    out.segments.push_back(out.length);
    for (auto& [id, seq] : out.per_mtd) seq.resize(out.length + bins, 0);
    for (const auto& a : ep.activations) {
      auto& seq = out.per_mtd[a.mtd];
      const auto from = out.length + static_cast<std::size_t>((a.t - start) / cfg.bin_ms);
      std::fill(seq.begin() + static_cast<std::ptrdiff_t>(from), seq.end(), std::uint8_t{1});
    }
    out.length += bins;
  }
  return out;
}

std::vector<PairScore> causality_scores(const CausalStats& stats, MtdId trigger,
                                        const CausalityConfig& cfg,
                                        sim::RngStream& rng) {
  std::vector<PairScore> out;
  const auto p = stats.coactivation_probability(trigger);
  if (p.empty()) return out;
  const auto seqs = build_activity_sequences(stats.episodes(), cfg.sequences);
  const auto& x = seqs.per_mtd.at(trigger);
  for (const auto& [j, prob] : p) {
    if (stats.cooccur(trigger, j) == 0) continue;
    PairScore s;
    s.from = trigger;
    s.to = j;
    s.coactivation = prob;
    const auto& y = seqs.per_mtd.at(j);
    const bool long_enough = seqs.length > static_cast<std::size_t>(10 * cfg.granger_max_lag);
    if (long_enough) {
      auto g = granger_score(x, y, cfg.granger_max_lag, seqs.segments);
      s.granger = g.score;
      s.granger_degenerate = g.degenerate;
      if (!g.degenerate) {
        auto null = permutation_null(
            x, seqs.segments,
            [&](std::span<const std::uint8_t> xs, const Segments& segs) {
              return granger_score(xs, y, cfg.granger_max_lag, segs).score;
            },
            cfg.shuffles, cfg.null_quantile, rng);
        s.granger_cutoff = null.cutoff;
      }
    } else {
      s.granger_degenerate = true;
    }
    if (seqs.length > static_cast<std::size_t>(cfg.di_context)) {
      try {
        s.di = directed_information(x, y, cfg.di_context, seqs.segments);
        auto null = permutation_null(
            x, seqs.segments,
            [&](std::span<const std::uint8_t> xs, const Segments& segs) {
              return directed_information(xs, y, cfg.di_context, segs);
            },
            cfg.shuffles, cfg.null_quantile, rng);
        s.di_cutoff = null.cutoff;
      } catch (const std::invalid_argument&) {
        s.di = 0.0;
      }
    }
    out.push_back(s);
  }
  return out;
}

std::string_view to_string(ScorePolicy p) {
  switch (p) {
    case ScorePolicy::kCoactivation: return "coactivation";
    case ScorePolicy::kGrangerGated: return "granger-gated";
    case ScorePolicy::kDiGated: return "di-gated";
  }
  return "?";
}

std::optional<ScorePolicy> parse_score_policy(std::string_view text) {
  for (auto p : {ScorePolicy::kCoactivation, ScorePolicy::kGrangerGated, ScorePolicy::kDiGated}) {
    if (to_string(p) == text) return p;
  }
  return std::nullopt;
}

std::vector<CascadeEntry> predict_event_cascade(const CausalStats& stats, MtdId trigger,
                                                double p_threshold, ScorePolicy policy,
                                                std::span<const PairScore> scores,
                                                bool smoothing) {
  std::vector<CascadeEntry> out;
  for (const auto& [j, prob] : stats.coactivation_probability(trigger, smoothing)) {
    if (prob < p_threshold) continue;
    auto lag = stats.median_lag(trigger, j);
    if (!lag) continue;
    if (policy != ScorePolicy::kCoactivation) {
      auto it = std::find_if(scores.begin(), scores.end(), [&](const PairScore& s) {
        return s.from == trigger && s.to == j;
      });
      if (it == scores.end()) continue;
      const bool pass = policy == ScorePolicy::kGrangerGated
                            ? (!it->granger_degenerate && it->granger > it->granger_cutoff)
                            : it->di > it->di_cutoff;
      if (!pass) continue;
    }
    out.push_back({j, *lag, stats.mean_packets(j), stats.mean_size_rbs(j), prob});
  }
  std::sort(out.begin(), out.end(), [](const CascadeEntry& a, const CascadeEntry& b) {
    return a.eta_ms != b.eta_ms ? a.eta_ms < b.eta_ms : a.mtd < b.mtd;
  });
  return out;
}

}  // namespace fastgrant::predict
