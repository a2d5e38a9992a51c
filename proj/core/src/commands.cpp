#include "fedar/commands.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "fedar/analysis.hpp"
#include "fedar/csv.hpp"
#include "fedar/errors.hpp"
#include "fedar/version.hpp"

namespace fedar {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_json(const json& doc, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << doc.dump(2) << '\n';
  if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

std::vector<double> column_doubles(const CsvTable& table, std::string_view name) {
  const std::size_t col = table.column(name);
  std::vector<double> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) out.push_back(std::stod(row[col]));
  return out;
}

std::string axis_value_label(SweepAxis axis, double value) {
  if (axis == SweepAxis::kNumClients) return fmt::format("{}", static_cast<std::size_t>(value));
  return fmt::format("{}", value);
}

// Maps errors to exit codes and logs them.
template <typename Fn>
int guarded(std::string_view what, Fn&& fn) {
  try {
    fn();
    return kExitOk;
  } catch (const ConfigError& e) {
    spdlog::error("{}: invalid configuration: {}", what, e.what());
    return kExitConfig;
  } catch (const PartitionError& e) {
    spdlog::error("{}: invalid configuration: {}", what, e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    spdlog::error("{}: {}", what, e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    spdlog::error("{}: {}", what, e.what());
    return kExitRuntime;
  }
}

}  // namespace

void write_model(const ParamVector& params, const fs::path& path) {
  std::string bytes;
  bytes.reserve(8 * (static_cast<std::size_t>(params.size()) + 1));
  const auto put = [&](std::uint64_t v) {
    for (int k = 0; k < 8; ++k) bytes.push_back(static_cast<char>((v >> (8 * k)) & 0xFFU));
  };
  put(static_cast<std::uint64_t>(params.size()));
  for (Eigen::Index i = 0; i < params.size(); ++i) put(std::bit_cast<std::uint64_t>(params[i]));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

ParamVector read_model(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  const auto get = [&]() {
    unsigned char buf[8];
    if (!in.read(reinterpret_cast<char*>(buf), 8)) {
      throw FormatError(fmt::format("{}: truncated model file", path.string()));
    }
    std::uint64_t v = 0;
    for (int k = 7; k >= 0; --k) v = (v << 8) | buf[k];
    return v;
  };
  const std::uint64_t n = get();
  ParamVector params(static_cast<Eigen::Index>(n));
  for (std::uint64_t i = 0; i < n; ++i) {
    params[static_cast<Eigen::Index>(i)] = std::bit_cast<double>(get());
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(fmt::format("{}: trailing bytes after {} parameters", path.string(), n));
  }
  return params;
}

void ensure_writable_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError(fmt::format("cannot create output directory {}", dir.string()));
  }
  const fs::path probe = dir / ".fedar-write-probe";
  {
    std::ofstream out(probe);
    if (!out) throw IoError(fmt::format("output directory {} is not writable", dir.string()));
  }
  fs::remove(probe, ec);
}

void write_run_artifacts(const ExperimentConfig& config, const ExperimentResult& result,
                         const fs::path& dir) {
  {
    CsvWriter w(dir / "rounds.csv",
                {"round", "train_loss", "test_accuracy", "n_t", "num_participating", "participating"});
    for (const auto& r : result.rounds) {
      w.row({std::to_string(r.round), format_double(r.train_loss), format_double(r.test_accuracy),
             std::to_string(r.contributors), std::to_string(r.participating.size()),
             fmt::format("{}", fmt::join(r.participating, ";"))});
    }
    w.close();
  }
  {
    CsvWriter w(dir / "timing.csv", {"round", "wall_time"});
    for (const auto& r : result.rounds) w.row({std::to_string(r.round), format_double(r.wall_time)});
    w.close();
  }
  {
    CsvWriter per(dir / "per_client.csv", {"client", "probability", "participation",
                                           "train_samples", "test_samples", "accuracy"});
    CsvWriter bias(dir / "bias.csv", {"client", "accuracy"});
    for (std::size_t i = 0; i < result.client_accuracy.size(); ++i) {
      per.row({std::to_string(i), format_double(result.probabilities[i]),
               std::to_string(result.participation[i]), std::to_string(result.train_sizes[i]),
               std::to_string(result.test_sizes[i]), format_double(result.client_accuracy[i])});
      bias.row({std::to_string(i), format_double(result.client_accuracy[i])});
    }
    per.close();
    bias.close();
  }
  write_model(result.final_model, dir / "final_model.bin");
  const json cfg = config_to_json(config);
  write_json(cfg, dir / "config.echo.json");
  write_json(json{{"seed", config.seed},
                  {"strategy", config.strategy},
                  {"version", std::string(version())},
                  {"git_hash", std::string(git_hash())},
                  {"config", cfg}},
             dir / "meta.json");
}

int run_command(const ExperimentConfig& config, const fs::path& out_dir) {
  int code = guarded("run", [&] { config.validate(); });
  if (code != kExitOk) return code;
  code = guarded("run", [&] { ensure_writable_dir(out_dir); });
  if (code != kExitOk) return code;
  return guarded("run", [&] {
    spdlog::info("run: strategy={} N={} T={} seed={} -> {}", config.strategy, config.num_clients,
                 config.rounds, config.seed, out_dir.string());
    const ExperimentResult result = run_experiment(config);
    write_run_artifacts(config, result, out_dir);
  });
}

int sweep_command(const SweepSpec& spec, const fs::path& out_dir) {
  int code = guarded("sweep", [&] { ensure_writable_dir(out_dir); });
  if (code != kExitOk) return code;

  struct CellSummary {
    std::string value;
    std::string strategy;
    std::size_t failed = 0;
    std::vector<double> loss, acc, client_mean, client_var;
  };
  std::vector<CellSummary> cells;
  bool any_failed = false;

  for (double value : spec.values) {
    const std::string label = axis_value_label(spec.axis, value);
    for (const auto& strategy : spec.strategies) {
      CellSummary cell;
      cell.value = label;
      cell.strategy = strategy;
      for (std::uint64_t seed : spec.seeds) {
        const fs::path dir = out_dir / fmt::format("{}={}", to_string(spec.axis), label) / strategy /
                             fmt::format("seed={}", seed);
        const int rc = guarded(dir.string(), [&] {
          ExperimentConfig cfg = apply_axis(spec.base, spec.axis, value);
          cfg.strategy = strategy;
          cfg.seed = seed;
          ensure_writable_dir(dir);
          const ExperimentResult result = run_experiment(cfg);
          write_run_artifacts(cfg, result, dir);
          if (!result.rounds.empty()) {
            cell.loss.push_back(result.rounds.back().train_loss);
            cell.acc.push_back(result.rounds.back().test_accuracy);
          }
          const AccuracyStats st = accuracy_stats(result.client_accuracy);
          cell.client_mean.push_back(st.mean);
          cell.client_var.push_back(st.variance);
        });
        if (rc != kExitOk) {
          ++cell.failed;
          any_failed = true;
        }
      }
      spdlog::info("sweep: {}={} {} done ({} failed)", to_string(spec.axis), label, strategy,
                   cell.failed);
      cells.push_back(std::move(cell));
    }
  }

  code = guarded("sweep", [&] {
    CsvWriter w(out_dir / "sweep_summary.csv",
                {"axis", "value", "strategy", "seeds", "failed", "final_train_loss",
                 "final_test_accuracy", "client_accuracy_mean", "client_accuracy_var"});
    for (const auto& c : cells) {
      w.row({std::string(to_string(spec.axis)), c.value, c.strategy,
             std::to_string(spec.seeds.size()), std::to_string(c.failed),
             format_double(mean_of(c.loss)), format_double(mean_of(c.acc)),
             format_double(mean_of(c.client_mean)), format_double(mean_of(c.client_var))});
    }
    w.close();
  });
  if (code != kExitOk) return code;
  code = report_command(out_dir, out_dir);
  if (any_failed) return kExitPartial;
  return code;
}

int shapley_command(const ExperimentConfig& base, const std::vector<std::size_t>& levels,
                    const std::vector<std::uint64_t>& seeds, const fs::path& out_dir) {
  int code = guarded("shapley", [&] {
    if (levels.empty()) throw ConfigError("shapley: no stale levels given");
    if (seeds.empty()) throw ConfigError("shapley: no seeds given");
    ExperimentConfig probe = base;
    probe.strategy = "fedar";
    probe.availability.kind = AvailabilitySource::kStale;
    probe.availability.stale_rounds = *std::max_element(levels.begin(), levels.end());
    probe.validate();
  });
  if (code != kExitOk) return code;
  code = guarded("shapley", [&] { ensure_writable_dir(out_dir); });
  if (code != kExitOk) return code;

  return guarded("shapley", [&] {
    const std::size_t n = base.num_clients;
    std::vector<std::vector<double>> phi(levels.size(), std::vector<double>(n, 0.0));
    std::vector<std::vector<double>> pct(levels.size(), std::vector<double>(n, 0.0));
    std::vector<std::string> labels(levels.size());

    CsvWriter runs(out_dir / "shapley_runs.csv", {"seed", "level", "label", "client", "phi", "percent"});
    for (std::uint64_t seed : seeds) {
      ExperimentConfig cfg = base;
      cfg.seed = seed;
      const auto results = staleness_contribution_experiment(cfg, levels);
      for (std::size_t l = 0; l < results.size(); ++l) {
        labels[l] = results[l].label;
        for (std::size_t i = 0; i < n; ++i) {
          phi[l][i] += results[l].report.values[i];
          pct[l][i] += results[l].report.percent[i];
          runs.row({std::to_string(seed), std::to_string(levels[l]), labels[l], std::to_string(i),
                    format_double(results[l].report.values[i]),
                    format_double(results[l].report.percent[i])});
        }
      }
      spdlog::info("shapley: seed {} done", seed);
    }
    runs.close();

    const auto k = static_cast<double>(seeds.size());
    CsvWriter w(out_dir / "shapley.csv", {"level", "label", "client", "phi", "percent"});
    for (std::size_t l = 0; l < levels.size(); ++l) {
      for (std::size_t i = 0; i < n; ++i) {
        w.row({std::to_string(levels[l]), labels[l], std::to_string(i), format_double(phi[l][i] / k),
               format_double(pct[l][i] / k)});
      }
    }
    w.close();
  });
}

namespace {

struct RunInfo {
  fs::path dir;
  std::string strategy;
  std::uint64_t seed = 0;
};

fs::path common_ancestor(const std::vector<fs::path>& paths) {
  fs::path common = paths.front();
  for (const auto& p : paths) {
    fs::path next;
    auto a = common.begin();
    auto b = p.begin();
    for (; a != common.end() && b != p.end() && *a == *b; ++a, ++b) next /= *a;
    common = next;
  }
  return common;
}

void report_group(const std::vector<RunInfo>& runs, const fs::path& out) {
  std::map<std::string, std::vector<const RunInfo*>> by_strategy;
  for (const auto& r : runs) by_strategy[r.strategy].push_back(&r);

  CsvWriter stats(out / "stats.csv", {"strategy", "mean", "var", "worst10", "best10"});
  for (const auto& [strategy, members] : by_strategy) {
    std::vector<double> mean, var, worst, best;
    for (const RunInfo* r : members) {
      const auto acc = column_doubles(read_csv(r->dir / "per_client.csv"), "accuracy");
      const AccuracyStats st = accuracy_stats(acc);
      mean.push_back(st.mean);
      var.push_back(st.variance);
      worst.push_back(st.worst10_mean);
      best.push_back(st.best10_mean);
    }
    stats.row({strategy, format_double(mean_of(mean)), format_double(mean_of(var)),
               format_double(mean_of(worst)), format_double(mean_of(best))});
  }
  stats.close();

  // Paired over (seed, round): the test-accuracy series of each shared seed, concatenated.
  std::vector<std::string> names;
  for (const auto& [strategy, members] : by_strategy) names.push_back(strategy);
  std::stable_partition(names.begin(), names.end(), [](const auto& s) { return s == "fedar"; });

  CsvWriter tt(out / "ttest.csv", {"strategy_a", "strategy_b", "t", "p"});
  for (std::size_t a = 0; a < names.size(); ++a) {
    for (std::size_t b = a + 1; b < names.size(); ++b) {
      std::map<std::uint64_t, const RunInfo*> rb;
      for (const RunInfo* r : by_strategy[names[b]]) rb[r->seed] = r;
      std::vector<double> xa, xb;
      bool aligned = true;
      for (const RunInfo* r : by_strategy[names[a]]) {
        auto it = rb.find(r->seed);
        if (it == rb.end()) continue;
        auto sa = column_doubles(read_csv(r->dir / "rounds.csv"), "test_accuracy");
        auto sb = column_doubles(read_csv(it->second->dir / "rounds.csv"), "test_accuracy");
        if (sa.size() != sb.size()) {
          aligned = false;
          break;
        }
        xa.insert(xa.end(), sa.begin(), sa.end());
        xb.insert(xb.end(), sb.begin(), sb.end());
      }
      if (!aligned || xa.size() < 2) {
        spdlog::warn("report: cannot pair {} with {} under {}", names[a], names[b], out.string());
        continue;
      }
      const TTestResult r = paired_t_test(xa, xb);
      tt.row({names[a], names[b], format_double(r.t), format_double(r.p)});
    }
  }
  tt.close();
}

}  // namespace

int report_command(const fs::path& in_dir, const fs::path& out_dir) {
  return guarded("report", [&] {
    if (!fs::is_directory(in_dir)) throw IoError(fmt::format("{} is not a directory", in_dir.string()));
    std::map<std::string, std::vector<RunInfo>> groups;
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::recursive_directory_iterator(in_dir)) {
      if (entry.is_directory()) dirs.push_back(entry.path());
    }
    dirs.push_back(in_dir);
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
      if (!fs::exists(dir / "config.echo.json") || !fs::exists(dir / "rounds.csv") ||
          !fs::exists(dir / "per_client.csv")) {
        continue;
      }
      json cfg = read_json(dir / "config.echo.json");
      RunInfo info{dir, cfg.at("strategy").get<std::string>(), cfg.at("seed").get<std::uint64_t>()};
      cfg.erase("strategy");
      cfg.erase("seed");
      groups[cfg.dump()].push_back(std::move(info));
    }
    if (groups.empty()) throw IoError(fmt::format("no runs found under {}", in_dir.string()));

    for (const auto& [key, runs] : groups) {
      std::vector<fs::path> rel;
      for (const auto& r : runs) rel.push_back(fs::relative(r.dir, in_dir));
      const fs::path target = out_dir / common_ancestor(rel);
      ensure_writable_dir(target);
      report_group(runs, target);
      spdlog::info("report: {} runs -> {}", runs.size(), target.string());
    }
  });
}

}  // namespace fedar
