#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedar/config.hpp"
#include "fedar/engine.hpp"

namespace fedar {

enum ExitCode : int {
  kExitOk = 0,
  kExitRuntime = 1,
  kExitConfig = 2,
  kExitIo = 3,
  kExitPartial = 4,
};

/// Writes the artifacts of one finished run into `dir`:
/// rounds.csv, timing.csv, per_client.csv, bias.csv, final_model.bin,
/// config.echo.json and meta.json.
void write_run_artifacts(const ExperimentConfig& config, const ExperimentResult& result,
                         const std::filesystem::path& dir);

/// final_model.bin: little-endian u64 length, then little-endian f64 values.
void write_model(const ParamVector& params, const std::filesystem::path& path);
ParamVector read_model(const std::filesystem::path& path);

/// Fails with IoError unless `dir` exists (or can be created) and accepts files.
void ensure_writable_dir(const std::filesystem::path& dir);

int run_command(const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// Runs every (axis value, strategy, seed) cell into
/// `<out>/<axis>=<value>/<strategy>/seed=<seed>`, then writes
/// sweep_summary.csv and the report tables. Failed cells are logged and the
/// sweep continues; the exit code is kExitPartial if any cell failed.
int sweep_command(const SweepSpec& spec, const std::filesystem::path& out_dir);

/// Stale-update contribution experiment averaged over `seeds`.
/// Writes shapley.csv (level, label, client, phi, percent) with seed means
/// and shapley_runs.csv with one row per seed.
int shapley_command(const ExperimentConfig& base, const std::vector<std::size_t>& levels,
                    const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out_dir);

/// Scans `in_dir` for run directories and, for every group of runs that share
/// a configuration up to strategy and seed, writes stats.csv and ttest.csv
/// into the matching place under `out_dir`.
int report_command(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir);

}  // namespace fedar
