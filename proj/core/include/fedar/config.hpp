#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedar/engine.hpp"

namespace fedar {

/// Builds a validated ExperimentConfig from JSON. Missing keys take their
/// defaults (K = 5, batch 64, eta0 = 0.1, rho = 0.1, psi_max = 2); "rounds"
/// and "dataset" are required. Unknown keys, wrong types and invariant
/// violations raise ConfigError with the offending path, e.g. "config.rho".
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig parse_config(const std::filesystem::path& path);

/// Full serialization with every default made explicit.
nlohmann::json config_to_json(const ExperimentConfig& config);

enum class SweepAxis { kPMin, kNumClients, kRho };

struct SweepSpec {
  ExperimentConfig base;
  SweepAxis axis = SweepAxis::kPMin;
  std::vector<double> values;
  std::vector<std::string> strategies;
  std::vector<std::uint64_t> seeds;
};

std::string_view to_string(SweepAxis axis);

/// {"base": {...}, "axis": {"name": "p_min" | "num_clients" | "rho",
///  "values": [...]}, "strategies": [...], "seeds": [...]}
SweepSpec sweep_from_json(const nlohmann::json& doc);
SweepSpec parse_sweep(const std::filesystem::path& path);

/// Applies one axis value to a copy of the base config and validates it.
ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis, double value);

}  // namespace fedar
