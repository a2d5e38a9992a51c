#include "fedar/availability.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include <fmt/format.h>

namespace fedar {

AvailabilityModel AvailabilityModel::bernoulli(std::vector<double> probabilities) {
  for (double p : probabilities) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ConfigError(fmt::format("availability probability {} outside [0, 1]", p));
    }
  }
  AvailabilityModel m;
  m.kind_ = AvailabilityKind::kBernoulli;
  m.probabilities_ = std::move(probabilities);
  return m;
}

AvailabilityModel AvailabilityModel::trace(std::vector<std::vector<bool>> schedule) {
  AvailabilityModel m;
  m.kind_ = AvailabilityKind::kTrace;
  if (!schedule.empty()) {
    const std::size_t len = schedule.front().size();
    for (const auto& row : schedule) {
      if (row.size() != len) throw ConfigError("availability trace rows differ in length");
    }
  }
  m.probabilities_.reserve(schedule.size());
  for (const auto& row : schedule) {
    std::size_t active = 0;
    for (bool a : row) active += a;
    m.probabilities_.push_back(row.empty() ? 0.0
                                           : static_cast<double>(active) /
                                                 static_cast<double>(row.size()));
  }
  m.schedule_ = std::move(schedule);
  return m;
}

std::size_t AvailabilityModel::num_clients() const {
  return kind_ == AvailabilityKind::kTrace ? schedule_.size() : probabilities_.size();
}

std::size_t AvailabilityModel::trace_length() const {
  if (kind_ != AvailabilityKind::kTrace || schedule_.empty()) return 0;
  return schedule_.front().size();
}

std::vector<double> sample_probabilities(std::size_t num_clients, double p_min, RngStream rng) {
  if (!(p_min > 0.0 && p_min <= 1.0)) {
    throw ConfigError(fmt::format("p_min = {} must lie in (0, 1]", p_min));
  }
  std::vector<double> out(num_clients);
  for (double& p : out) p = p_min + (1.0 - p_min) * rng.uniform();
  return out;
}

bool is_available(const AvailabilityModel& model, ClientId client, Round round,
                  const RngStream& root) {
  if (client >= model.num_clients()) {
    throw ConfigError(fmt::format("unknown client id {} (have {})", client, model.num_clients()));
  }
  if (round == 0) throw ConfigError("rounds are numbered from 1");
  if (model.kind() == AvailabilityKind::kTrace) {
    if (round > model.trace_length()) {
      throw ConfigError(fmt::format("round {} beyond trace length {}", round,
                                    model.trace_length()));
    }
    return model.schedule()[client][round - 1];
  }
  const double p = model.probabilities()[client];
  if (p >= 1.0) return true;
  RngStream draw = root.derive("availability", client, round);
  return draw.uniform() < p;
}

AvailabilityModel make_stale_trace(std::size_t num_clients, std::size_t total_rounds,
                                   ClientId stale_client, std::size_t stale_rounds) {
  if (stale_client >= num_clients) {
    throw ConfigError(fmt::format("stale client {} out of range for {} clients", stale_client,
                                  num_clients));
  }
  if (stale_rounds > total_rounds) {
    throw ConfigError(fmt::format("stale_rounds {} exceeds total rounds {}", stale_rounds,
                                  total_rounds));
  }
  std::vector<std::vector<bool>> schedule(num_clients, std::vector<bool>(total_rounds, true));
  for (std::size_t t = total_rounds - stale_rounds; t < total_rounds; ++t) {
    schedule[stale_client][t] = false;
  }
  return AvailabilityModel::trace(std::move(schedule));
}

AvailabilityModel load_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open trace '{}'", path.string()));
  std::vector<std::vector<bool>> schedule;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<bool> row;
    for (std::size_t pos = 0; pos <= line.size();) {
      const std::size_t comma = std::min(line.find(',', pos), line.size());
      std::string field = line.substr(pos, comma - pos);
      while (!field.empty() && field.front() == ' ') field.erase(field.begin());
      while (!field.empty() && field.back() == ' ') field.pop_back();
      if (field == "1") {
        row.push_back(true);
      } else if (field == "0") {
        row.push_back(false);
      } else {
        throw FormatError(fmt::format("'{}' line {}: entries must be 0 or 1, found '{}'",
                                      path.string(), line_no, field));
      }
      pos = comma + 1;
    }
    schedule.push_back(std::move(row));
  }
  if (schedule.empty()) throw FormatError(fmt::format("'{}': empty trace", path.string()));
  return AvailabilityModel::trace(std::move(schedule));
}

}  // namespace fedar
