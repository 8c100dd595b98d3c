#include "fastgrant/harness/experiment.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "fastgrant/sim/rng.hpp"

namespace fastgrant::harness {

namespace {

using json = nlohmann::ordered_json;

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));
  out << text;
  out.flush();
  if (!out) throw std::runtime_error(fmt::format("write to {} failed", path.string()));
}

std::string regret_jsonl(const sched::RegretTrace& trace) {
  std::string out;
  for (const auto& r : trace.rows) {
    json j;
    j["t"] = r.t;
    j["reward_obtained"] = r.reward_obtained;
    j["reward_best_available"] = r.reward_best_available;
    j["regret"] = r.regret;
    j["cumulative_regret"] = r.cumulative_regret;
    out += j.dump();
    out += '\n';
  }
  return out;
}

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string quality_jsonl(std::span<const QualityTick> ticks) {
  std::string out;
  for (const auto& p : prediction_quality(ticks).ticks) {
    json j;
    j["t_ms"] = p.t;
    j["precision"] = nullable(p.precision);
    j["recall"] = nullable(p.recall);
    out += j.dump();
    out += '\n';
  }
  return out;
}

struct SeedOutput {
  MetricsReport report;
  std::vector<QualityTick> quality;
};

SeedOutput run_seed(const SimConfig& cfg, std::uint64_t seed, const GroundTruth* shared) {
  const std::filesystem::path dir = cfg.output.dir;
  const bool files = !cfg.output.dir.empty();
  std::unique_ptr<sim::TraceSink> sink;
  if (cfg.output.trace_level != sim::TraceLevel::kNone) {
    if (files) {
      sink = std::make_unique<sim::FileTraceSink>(
          cfg.output.trace_level,
          (dir / fmt::format("trace-{}-seed{}.jsonl", to_string(cfg.scheme), seed)).string());
    } else {
      sink = std::make_unique<sim::DigestTraceSink>(cfg.output.trace_level);
    }
  }
  sched::RegretTrace regret;
  SeedOutput out;
  RunOptions opts;
  opts.trace = sink.get();
  opts.regret = &regret;
  opts.quality = &out.quality;

  GroundTruth own;
  if (shared == nullptr) {
    own = generate_ground_truth(cfg, seed);
    shared = &own;
  }
  out.report = run(cfg, *shared, seed, opts);
  if (files) {
    const auto scheme = to_string(cfg.scheme);
    if (cfg.output.regret && cfg.scheme == Scheme::kFug) {
      write_file(dir / fmt::format("regret-{}-seed{}.jsonl", scheme, seed), regret_jsonl(regret));
    }
    if (cfg.scheme == Scheme::kFug && cfg.fug.predictor.kind != PredictorKind::kNone) {
      write_file(dir / fmt::format("quality-{}-seed{}.jsonl", scheme, seed), quality_jsonl(out.quality));
    }
    if (cfg.output.episodes) {
      write_file(dir / fmt::format("episodes-seed{}.jsonl", seed), episodes_to_jsonl(shared->episodes));
    }
  }
  return out;
}

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void ensure_dir(const SimConfig& cfg) {
  if (cfg.output.dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(cfg.output.dir, ec);
  if (ec) throw std::runtime_error(fmt::format("cannot create {}: {}", cfg.output.dir, ec.message()));
}

std::string fmt_opt(const std::optional<double>& v, int digits) {
  return v ? fmt::format("{:.{}f}", *v, digits) : std::string("-");
}

std::optional<double> metric(const AggregateReport& r, const std::string& name) {
  auto it = r.metrics.find(name);
  if (it == r.metrics.end()) return std::nullopt;
  return it->second.mean;
}

}  // namespace

ExperimentResult run_experiment(const SimConfig& cfg) {
  ensure_dir(cfg);
  std::vector<SeedOutput> outs(cfg.seeds.size());
  parallel_for(cfg.seeds.size(), cfg.threads, [&](std::size_t i) { outs[i] = run_seed(cfg, cfg.seeds[i], nullptr); });
  ExperimentResult res;
  for (auto& o : outs) {
    res.runs.push_back(std::move(o.report));
    res.quality.push_back(std::move(o.quality));
  }
  res.aggregate = aggregate(res.runs);
  if (!cfg.output.dir.empty()) {
    const std::filesystem::path dir = cfg.output.dir;
    std::string lines;
    for (const auto& r : res.runs) lines += r.to_json() + "\n";
    write_file(dir / fmt::format("reports-{}.jsonl", to_string(cfg.scheme)), lines);
    write_file(dir / fmt::format("aggregate-{}.json", to_string(cfg.scheme)), res.aggregate.to_json() + "\n");
  }
  return res;
}

std::vector<Scheme> comparison_schemes() {
  return {Scheme::kCoordinated, Scheme::kSlotted, Scheme::kUncoordinated, Scheme::kFug};
}

ComparisonTable compare_schemes(const SimConfig& cfg, std::span<const Scheme> schemes) {
  ensure_dir(cfg);
  std::vector<Scheme> list(schemes.begin(), schemes.end());
  if (list.empty()) list = comparison_schemes();
  const std::size_t n = cfg.seeds.size();
  std::vector<GroundTruth> truths(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) { truths[i] = generate_ground_truth(cfg, cfg.seeds[i]); });

  ComparisonTable table;
  for (const auto& t : truths) table.truth_digests.push_back(t.digest());
  for (Scheme s : list) {
    SimConfig c = cfg;
    c.scheme = s;
    if (s != Scheme::kFug) c.output.episodes = false;
    std::vector<SeedOutput> outs(n);
    parallel_for(n, cfg.threads, [&](std::size_t i) { outs[i] = run_seed(c, c.seeds[i], &truths[i]); });
    ComparisonRow row;
    row.scheme = s;
    for (auto& o : outs) row.runs.push_back(std::move(o.report));
    row.aggregate = aggregate(row.runs);
    table.rows.push_back(std::move(row));
  }
  if (!cfg.output.dir.empty()) {
    const std::filesystem::path dir = cfg.output.dir;
    write_file(dir / "comparison.jsonl", table.to_jsonl());
    write_file(dir / "comparison.txt", table.to_text());
  }
  return table;
}

std::string ComparisonTable::to_text() const {
  std::string out = fmt::format("{:<14} {:>16} {:>18} {:>18} {:>10} {:>10} {:>10} {:>10} {:>10}\n", "scheme",
                                "signaling_rbs", "broadcast_msgs", "collision_prob", "p50_ms", "p95_ms", "p99_ms",
                                "miss_rate", "waste");
  for (const auto& row : rows) {
    const auto& a = row.aggregate;
    out += fmt::format("{:<14} {:>16} {:>18} {:>18} {:>10} {:>10} {:>10} {:>10} {:>10}\n", to_string(row.scheme),
                       fmt_opt(metric(a, "signaling_rb_units"), 1), fmt_opt(metric(a, "broadcast_messages"), 1),
                       fmt_opt(metric(a, "collision_probability"), 4), fmt_opt(metric(a, "latency_p50_ms"), 1),
                       fmt_opt(metric(a, "latency_p95_ms"), 1), fmt_opt(metric(a, "latency_p99_ms"), 1),
                       fmt_opt(metric(a, "deadline_miss_rate"), 4), fmt_opt(metric(a, "waste_fraction"), 4));
  }
  return out;
}

std::string ComparisonTable::to_jsonl() const {
  std::string out;
  for (const auto& row : rows) out += row.aggregate.to_json() + "\n";
  return out;
}

QualitySeries prediction_quality(std::span<const QualityTick> ticks) {
  QualitySeries s;
  std::uint64_t pred = 0, act = 0, hits = 0;
  for (const auto& t : ticks) {
    QualityPoint p;
    p.t = t.t;
    if (t.predicted > 0) p.precision = static_cast<double>(t.hits) / t.predicted;
    if (t.actual > 0) p.recall = static_cast<double>(t.hits) / t.actual;
    s.ticks.push_back(p);
    pred += t.predicted;
    act += t.actual;
    hits += t.hits;
  }
  if (pred > 0) s.precision = static_cast<double>(hits) / static_cast<double>(pred);
  if (act > 0) s.recall = static_cast<double>(hits) / static_cast<double>(act);
  return s;
}

std::string episodes_to_jsonl(std::span<const traffic::EventEpisode> episodes) {
  std::string out;
  for (const auto& ep : episodes) {
    for (const auto& a : ep.activations) {
      out += fmt::format(R"({{"event_id":{},"mtd_id":{},"t_activate":{}}})", ep.event_id, a.mtd, a.t);
      out += '\n';
    }
  }
  return out;
}

std::vector<predict::EpisodeRecord> parse_episodes(const std::string& text) {
  std::map<std::uint32_t, predict::EpisodeRecord> by_id;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto id = j.at("event_id").get<std::uint32_t>();
      const auto mtd = j.at("mtd_id").get<MtdId>();
      const auto t = j.at("t_activate").get<Millis>();
      auto& rec = by_id[id];
      rec.id = id;
      rec.activate(mtd, t);
      rec.packets[mtd] = 1;
      rec.rbs[mtd] = 1;
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(fmt::format("episode dump line {}: {}", line_no, e.what()));
    }
  }
  std::vector<predict::EpisodeRecord> out;
  for (auto& [id, rec] : by_id) {
    rec.trigger = rec.activations.front().mtd;
    rec.opened_at = rec.activations.front().t;
    out.push_back(std::move(rec));
  }
  return out;
}

std::string causality_matrix_jsonl(std::span<const predict::EpisodeRecord> episodes,
                                   const predict::CausalityConfig& cfg, std::uint64_t seed) {
  predict::CausalStats stats;
  for (const auto& ep : episodes) stats.update_event_stats(ep);
  sim::RngStream rng(seed, "predictor");
  std::string out;
  for (MtdId i : stats.mtds()) {
    for (const auto& s : predict::causality_scores(stats, i, cfg, rng)) {
      json j;
      j["i"] = s.from;
      j["j"] = s.to;
      j["coactivation"] = s.coactivation;
      j["granger"] = s.granger;
      j["granger_cutoff"] = s.granger_cutoff;
      j["di"] = s.di;
      j["di_cutoff"] = s.di_cutoff;
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

}  // namespace fastgrant::harness
