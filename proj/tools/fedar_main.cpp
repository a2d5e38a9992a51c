#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "fedar/commands.hpp"
#include "fedar/config.hpp"
#include "fedar/errors.hpp"
#include "fedar/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> strategy;
};

json load_document(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw fedar::IoError(fmt::format("cannot open {}", path.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw fedar::ConfigError(fmt::format("{}: invalid JSON: {}", path.string(), e.what()));
  }
  // A meta.json from an earlier run carries the full config.
  if (doc.is_object() && doc.contains("git_hash") && doc.contains("config")) return doc["config"];
  return doc;
}

void apply_overrides(json& doc, const Overrides& o) {
  if (o.seed) doc["seed"] = *o.seed;
  if (o.strategy) doc["strategy"] = *o.strategy;
}

template <typename Fn>
int load_then(Fn&& fn) {
  try {
    return fn();
  } catch (const fedar::IoError& e) {
    spdlog::error("{}", e.what());
    return fedar::kExitIo;
  } catch (const fedar::ConfigError& e) {
    spdlog::error("invalid configuration: {}", e.what());
    return fedar::kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedar: federated learning under intermittent client availability"};
  app.set_version_flag("--version", fmt::format("fedar {} ({})", fedar::version(), fedar::git_hash()));
  app.require_subcommand(1);

  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  std::string config_path;
  std::string out_dir;
  Overrides overrides;

  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("-c,--config", config_path, "Experiment config (JSON) or a meta.json")->required();
  run->add_option("-o,--out", out_dir, "Output directory")->required();
  run->add_option("--seed", overrides.seed, "Override the seed");
  run->add_option("--strategy", overrides.strategy, "Override the strategy");

  auto* sweep = app.add_subcommand("sweep", "Grid over one axis, strategies and seeds");
  sweep->add_option("-c,--config", config_path, "Sweep spec (JSON)")->required();
  sweep->add_option("-o,--out", out_dir, "Output directory")->required();

  std::vector<std::size_t> levels{0, 1, 2, 3, 4, 5, 6};
  std::vector<std::uint64_t> seeds;
  auto* shap = app.add_subcommand("shapley", "Contribution of stale updates to the last aggregation");
  shap->add_option("-c,--config", config_path, "Base experiment config (JSON)")->required();
  shap->add_option("-o,--out", out_dir, "Output directory")->required();
  shap->add_option("--levels", levels, "Stale round counts to compare")->delimiter(',');
  shap->add_option("--seeds", seeds, "Seeds to average over (default: config seed)")->delimiter(',');

  std::string in_dir;
  auto* report = app.add_subcommand("report", "Accuracy spread and paired t-tests over finished runs");
  report->add_option("-i,--in", in_dir, "Directory holding run outputs")->required();
  report->add_option("-o,--out", out_dir, "Where to write stats.csv and ttest.csv");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(quiet ? spdlog::level::warn : spdlog::level::info);

  if (*run) {
    return load_then([&] {
      json doc = load_document(config_path);
      apply_overrides(doc, overrides);
      return fedar::run_command(fedar::config_from_json(doc), out_dir);
    });
  }
  if (*sweep) {
    return load_then([&] { return fedar::sweep_command(fedar::sweep_from_json(load_document(config_path)), out_dir); });
  }
  if (*shap) {
    return load_then([&] {
      const auto base = fedar::config_from_json(load_document(config_path));
      if (seeds.empty()) seeds.push_back(base.seed);
      return fedar::shapley_command(base, levels, seeds, out_dir);
    });
  }
  if (*report) {
    return fedar::report_command(in_dir, out_dir.empty() ? in_dir : out_dir);
  }
  return fedar::kExitRuntime;
}
