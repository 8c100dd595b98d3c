#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include "fastgrant/harness/config.hpp"
#include "fastgrant/harness/experiment.hpp"

using namespace fastgrant;
using namespace fastgrant::harness;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kFailure = 2;

struct Invalid : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot read {}", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// "1,2,5-8"
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string part;
  try {
    while (std::getline(ss, part, ',')) {
      if (part.empty()) continue;
      const auto dash = part.find('-');
      if (dash == std::string::npos) {
        out.push_back(std::stoull(part));
      } else {
        const auto lo = std::stoull(part.substr(0, dash));
        const auto hi = std::stoull(part.substr(dash + 1));
        if (hi < lo) throw Invalid(fmt::format("bad seed range '{}'", part));
        for (auto s = lo; s <= hi; ++s) out.push_back(s);
      }
    }
  } catch (const std::logic_error&) {
    throw Invalid(fmt::format("bad --seeds value '{}'", text));
  }
  if (out.empty()) throw Invalid("--seeds is empty");
  return out;
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string seeds;
  std::string out;
  std::string trace_level;
};

SimConfig load(const Common& c) {
  SimConfig cfg = parse_config(slurp(c.config));
  if (!c.seeds.empty()) cfg.seeds = parse_seeds(c.seeds);
  if (c.seed) cfg.seeds = {*c.seed};
  if (!c.out.empty()) cfg.output.dir = c.out;
  if (!c.trace_level.empty()) {
    auto lvl = sim::parse_trace_level(c.trace_level);
    if (!lvl) throw Invalid(fmt::format("unknown trace level '{}'", c.trace_level));
    cfg.output.trace_level = *lvl;
  }
  return cfg;
}

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
  auto* opt = cmd->add_option("--config", c.config, "config file (JSON)");
  if (needs_config) opt->required();
  cmd->add_option("--seed", c.seed, "single seed, overrides the config");
  cmd->add_option("--seeds", c.seeds, "seed list such as 1,2,10-20");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--trace-level", c.trace_level, "none, access or full");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fast uplink grant simulator"};
  app.require_subcommand(1);

  Common common;
  std::string episodes_path;
  auto* validate_cmd = app.add_subcommand("validate", "check a config and list every error");
  add_common(validate_cmd, common, true);
  auto* run_cmd = app.add_subcommand("run", "run the configured scheme for every seed");
  add_common(run_cmd, common, true);
  auto* compare_cmd = app.add_subcommand("compare", "run all schemes on shared traffic");
  add_common(compare_cmd, common, true);
  auto* offline_cmd = app.add_subcommand("predict-offline", "score causality in an episode dump");
  add_common(offline_cmd, common, false);
  offline_cmd->add_option("--episodes", episodes_path, "episode dump (JSON lines)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInvalid;
  }

  try {
    if (*validate_cmd) {
      load(common);
      std::cout << "ok\n";
    } else if (*run_cmd) {
      const auto cfg = load(common);
      const auto res = run_experiment(cfg);
      for (const auto& r : res.runs) std::cout << r.to_json() << "\n";
      std::cout << res.aggregate.to_json() << "\n";
    } else if (*compare_cmd) {
      const auto cfg = load(common);
      const auto table = compare_schemes(cfg);
      std::cout << table.to_text();
    } else if (*offline_cmd) {
      predict::CausalityConfig causality;
      std::uint64_t seed = common.seed.value_or(1);
      if (!common.config.empty()) {
        const auto cfg = load(common);
        causality = cfg.fug.predictor.causality;
        seed = cfg.seeds.front();
      }
      const auto episodes = parse_episodes(slurp(episodes_path));
      const auto text = causality_matrix_jsonl(episodes, causality, seed);
      if (common.out.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(common.out, std::ios::binary);
        if (!out) throw std::runtime_error(fmt::format("cannot open {} for writing", common.out));
        out << text;
      }
    }
  } catch (const ConfigErrors& e) {
    for (const auto& err : e.errors()) std::cerr << err.path << ": " << err.message << "\n";
    return kInvalid;
  } catch (const Invalid& e) {
    std::cerr << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
