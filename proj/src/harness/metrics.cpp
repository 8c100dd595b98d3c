#include "fastgrant/harness/metrics.hpp"

#include <cmath>
#include <set>

#include "json.hpp"

namespace fastgrant::harness {

using nlohmann::ordered_json;

void LatencyHistogram::add(Millis latency) {
  bins_[latency] += 1;
  count_ += 1;
  sum_ += static_cast<double>(latency);
}

std::optional<Millis> LatencyHistogram::percentile(double q) const {
  if (count_ == 0) return std::nullopt;
  auto rank = static_cast<std::uint64_t>(std::ceil(q * static_cast<double>(count_)));
  if (rank == 0) rank = 1;
  std::uint64_t seen = 0;
  for (const auto& [v, c] : bins_) {
    seen += c;
    if (seen >= rank) return v;
  }
  return bins_.rbegin()->first;
}

std::optional<double> LatencyHistogram::mean() const {
  if (count_ == 0) return std::nullopt;
  return sum_ / static_cast<double>(count_);
}

bool MetricsReport::conserved() const {
  if (generated != delivered + dropped + residual) return false;
  for (const auto& m : per_mtd) {
    if (!m.conserved()) return false;
  }
  return true;
}

std::vector<std::pair<std::string, double>> MetricsReport::scalars() const {
  std::vector<std::pair<std::string, double>> out;
  auto u = [&](const char* name, std::uint64_t v) { out.emplace_back(name, static_cast<double>(v)); };
  auto o = [&](const char* name, const std::optional<double>& v) {
    if (v) out.emplace_back(name, *v);
  };
  u("generated", generated);
  u("delivered", delivered);
  u("dropped", dropped);
  u("residual", residual);
  u("ra_attempts", ra_attempts);
  u("ra_successes", ra_successes);
  u("ra_collisions", ra_collisions);
  u("acb_barred", acb_barred);
  u("eab_barred", eab_barred);
  u("ra_exhausted", ra_exhausted);
  u("handshake_messages", handshake_messages);
  u("wasted_ra_slots", wasted_ra_slots);
  u("uncoordinated_transmissions", uncoordinated_transmissions);
  u("uncoordinated_collisions", uncoordinated_collisions);
  u("grant_intervals", grant_intervals);
  u("broadcast_messages", broadcast_messages);
  u("grants", grants);
  u("grant_rb_units", grant_rb_units);
  u("wasted_grants", wasted_grants);
  u("wasted_grant_rb_units", wasted_grant_rb_units);
  u("grant_overlaps", grant_overlaps);
  u("fallbacks", fallbacks);
  u("delivered_via_grant", delivered_via_grant);
  u("delivered_via_ra", delivered_via_ra);
  u("delivered_via_uncoordinated", delivered_via_uncoordinated);
  u("cascade_packets", cascade_packets);
  u("cascade_via_grant", cascade_via_grant);
  u("episodes_detected", episodes_detected);
  u("collision_count", collision_count);
  o("collision_probability", collision_probability);
  u("signaling_rb_units", signaling_rb_units);
  auto pct = [&](const char* name, double q) {
    if (auto v = latency.percentile(q)) out.emplace_back(name, static_cast<double>(*v));
  };
  pct("latency_p50_ms", 0.50);
  pct("latency_p95_ms", 0.95);
  pct("latency_p99_ms", 0.99);
  o("latency_mean_ms", latency.mean());
  o("deadline_miss_rate", deadline_miss_rate);
  o("waste_fraction", waste_fraction);
  o("precision", precision);
  o("recall", recall);
  o("cumulative_regret", cumulative_regret);
  return out;
}

std::string MetricsReport::to_json() const {
  ordered_json j;
  j["scheme"] = scheme;
  j["seed"] = seed;
  static const std::set<std::string> real = {"collision_probability", "latency_mean_ms", "deadline_miss_rate",
                                             "waste_fraction", "precision", "recall", "cumulative_regret"};
  for (const auto& [k, v] : scalars()) {
    if (real.count(k)) {
      j[k] = v;
    } else {
      j[k] = static_cast<std::int64_t>(v);
    }
  }
  auto null_or = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  j["precision"] = null_or(precision);
  j["recall"] = null_or(recall);
  j["policy"] = policy;
  ordered_json hist = ordered_json::array();
  for (const auto& [v, c] : latency.bins()) hist.push_back({v, c});
  j["latency_histogram"] = hist;
  j["conserved"] = conserved();
  j["trace_records"] = trace_records;
  j["trace_digest"] = trace_digest;
  return j.dump();
}

AggregateReport aggregate(std::span<const MetricsReport> runs) {
  AggregateReport out;
  out.runs = runs.size();
  if (!runs.empty()) out.scheme = runs.front().scheme;
  std::map<std::string, std::vector<double>> values;
  for (const auto& r : runs) {
    for (const auto& [k, v] : r.scalars()) values[k].push_back(v);
  }
  for (const auto& [k, vs] : values) {
    AggregateMetric m;
    m.n = vs.size();
    double sum = 0;
    for (double v : vs) sum += v;
    m.mean = sum / static_cast<double>(m.n);
    if (m.n > 1) {
      double ss = 0;
      for (double v : vs) ss += (v - m.mean) * (v - m.mean);
      m.se = std::sqrt(ss / static_cast<double>(m.n - 1)) / std::sqrt(static_cast<double>(m.n));
    }
    out.metrics[k] = m;
  }
  return out;
}

std::string AggregateReport::to_json() const {
  ordered_json j;
  j["scheme"] = scheme;
  j["runs"] = runs;
  ordered_json m = ordered_json::object();
  for (const auto& [k, v] : metrics) m[k] = {{"mean", v.mean}, {"se", v.se}, {"n", v.n}};
  j["metrics"] = m;
  return j.dump();
}

}  // namespace fastgrant::harness
