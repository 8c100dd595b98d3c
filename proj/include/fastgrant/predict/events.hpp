#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fastgrant/predict/causality.hpp"
#include "fastgrant/predict/history.hpp"
#include "fastgrant/predict/periodic.hpp"
#include "fastgrant/sim/rng.hpp"
#include "fastgrant/sim/types.hpp"

namespace fastgrant::predict {

struct ActivationRecord {
  MtdId mtd = 0;
  Millis t = 0;
  friend bool operator==(const ActivationRecord&, const ActivationRecord&) = default;
};

/// What the base station saw of one event.
struct EpisodeRecord {
  EpisodeId id = 0;
  MtdId trigger = 0;
  Millis opened_at = 0;
  /// First activation per MTD, sorted by (t, mtd).
  std::vector<ActivationRecord> activations;
  /// Event packets and RBs reported per MTD.
  std::map<MtdId, int> packets;
  std::map<MtdId, int> rbs;

  /// Records (or moves earlier) the activation of `mtd`.
  void activate(MtdId mtd, Millis t);
};

struct EventDetectorConfig {
  Millis window_ms = 500;
  /// Slack after the margin window within which an RA request still counts
  /// as a late periodic report.
  Millis explain_slack_ms = 50;
  double confidence_threshold = 0.5;
  /// Packet reports are still accepted this long after the window ends.
  Millis report_grace_ms = 100;
};

/// True iff a confident periodic component of the MTD has a nominal n with
/// n - margin <= t <= n + margin + slack.
bool explained_by_periodic(const PeriodicEstimate* estimate, Millis t,
                           const EventDetectorConfig& cfg);

struct EventTrigger {
  EpisodeId episode = 0;
  MtdId mtd = 0;
  Millis t = 0;
  /// True when the request opened the episode, false when it joined one.
  bool opened = false;
};

/// Event trigger detection. The first unexplained RA request opens an
/// episode; requests within `window_ms` of the trigger join it.
class EventDetector {
 public:
  explicit EventDetector(EventDetectorConfig cfg = {}) : cfg_(cfg) {}

  /// nullopt when the request is explained by a periodic component.
  std::optional<EventTrigger> detect_event_trigger(MtdId mtd, Millis t,
                                                   const PeriodicEstimate* estimate);
  /// Episode open at time t, if any.
  std::optional<EpisodeId> open_episode(Millis t) const;
  /// Most recent episode not yet closed.
  std::optional<EpisodeId> latest_open() const;
  /// Adds an activation or packet report to an open episode; ignored for
  /// unknown or closed episodes.
  void note_activation(EpisodeId id, MtdId mtd, Millis t);
  void note_packet(EpisodeId id, MtdId mtd, int size_rbs);
  /// Removes and returns every episode with now > opened_at + window + grace.
  std::vector<EpisodeRecord> close_expired(Millis now);
  /// Closes everything still open.
  std::vector<EpisodeRecord> close_all();

  const EventDetectorConfig& config() const { return cfg_; }

 private:
  EventDetectorConfig cfg_;
  EpisodeId next_id_ = 0;
  std::map<EpisodeId, EpisodeRecord> open_;
};

/// Pairwise event statistics accumulated over closed episodes.
class CausalStats {
 public:
  /// trigger_count(i) += 1 for every MTD in the episode; for each ordered
  /// pair (i, j) with t_i <= t_j, cooccur(i, j) += 1 and one lag sample
  /// t_j - t_i is stored.
  void update_event_stats(const EpisodeRecord& episode);

  int trigger_count(MtdId i) const;
  int cooccur(MtdId i, MtdId j) const;
  std::span<const Millis> lags(MtdId i, MtdId j) const;
  /// Lower median of the lag samples.
  std::optional<Millis> median_lag(MtdId i, MtdId j) const;
  double mean_packets(MtdId j) const;
  int mean_size_rbs(MtdId j) const;
  std::vector<MtdId> mtds() const;
  const std::vector<EpisodeRecord>& episodes() const { return episodes_; }

  /// p(j) = cooccur(trigger, j) / trigger_count(trigger), or
  /// (c + 1) / (n + 2) with smoothing. Unseen trigger: empty map.
  std::map<MtdId, double> coactivation_probability(MtdId trigger,
                                                   bool smoothing = false) const;

 private:
  std::map<MtdId, int> trigger_count_;
  std::map<std::pair<MtdId, MtdId>, int> cooccur_;
  std::map<std::pair<MtdId, MtdId>, std::vector<Millis>> lags_;
  std::map<MtdId, int> packets_;
  std::map<MtdId, int> rbs_;
  std::vector<EpisodeRecord> episodes_;
};

struct SequenceConfig {
  Millis bin_ms = 1;
  /// Extra bins appended after each episode's last activation.
  int tail_bins = 1;
};

/// Step-coded activity: within each episode, bin b of MTD i is 1 once i has
/// activated at or before the bin. One segment per episode.
struct ActivitySequences {
  std::map<MtdId, Sequence> per_mtd;
  Segments segments;
  std::size_t length = 0;
};

ActivitySequences build_activity_sequences(std::span<const EpisodeRecord> episodes,
                                           const SequenceConfig& cfg);

struct CausalityConfig {
  SequenceConfig sequences;
  int granger_max_lag = 2;
  int di_context = 1;
  int shuffles = 200;
  double null_quantile = 0.95;
};

struct PairScore {
  MtdId from = 0;
  MtdId to = 0;
  double coactivation = 0.0;
  double granger = 0.0;
  bool granger_degenerate = false;
  double granger_cutoff = 0.0;
  double di = 0.0;
  double di_cutoff = 0.0;
};

/// Granger and DI scores (with permutation-null cutoffs) of trigger -> j for
/// every j co-observed with the trigger. Sequences too short for a test give
/// a degenerate Granger result and zero DI.
std::vector<PairScore> causality_scores(const CausalStats& stats, MtdId trigger,
                                        const CausalityConfig& cfg,
                                        sim::RngStream& rng);

enum class ScorePolicy : std::uint8_t { kCoactivation, kGrangerGated, kDiGated };

std::string_view to_string(ScorePolicy p);
std::optional<ScorePolicy> parse_score_policy(std::string_view text);

struct CascadeEntry {
  MtdId mtd = 0;
  /// Median lag after the trigger.
  Millis eta_ms = 0;
  double expected_packets = 1.0;
  int expected_size_rbs = 1;
  double probability = 0.0;
};

/// MTDs predicted to follow `trigger`: those whose coactivation probability
/// reaches `p_threshold` and, for the gated policies, whose causality score
/// exceeds its null cutoff (`scores` must then cover the trigger). Ordered by
/// eta, then id. The trigger itself is never listed.
std::vector<CascadeEntry> predict_event_cascade(const CausalStats& stats, MtdId trigger,
                                                double p_threshold, ScorePolicy policy,
                                                std::span<const PairScore> scores = {},
                                                bool smoothing = false);

}  // namespace fastgrant::predict
