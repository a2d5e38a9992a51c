#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "fedar/errors.hpp"
#include "fedar/rng.hpp"

namespace fedar {

enum class AvailabilityKind { kBernoulli, kTrace };

/// Per-client participation process.
///
/// Bernoulli: client i is available in each round independently with
/// probability p_i. Trace: a fixed 0/1 schedule per client, indexed by round
/// (round 1 is column 0).
class AvailabilityModel {
 public:
  static AvailabilityModel bernoulli(std::vector<double> probabilities);
  static AvailabilityModel trace(std::vector<std::vector<bool>> schedule);

  AvailabilityKind kind() const { return kind_; }
  std::size_t num_clients() const;
  /// Number of rounds a trace covers (0 for Bernoulli).
  std::size_t trace_length() const;

  /// Bernoulli: the p_i. Trace: each client's empirical fraction of active rounds.
  const std::vector<double>& probabilities() const { return probabilities_; }
  const std::vector<std::vector<bool>>& schedule() const { return schedule_; }

 private:
  AvailabilityKind kind_ = AvailabilityKind::kBernoulli;
  std::vector<double> probabilities_;
  std::vector<std::vector<bool>> schedule_;
};

/// p_i drawn i.i.d. uniform on [p_min, 1].
std::vector<double> sample_probabilities(std::size_t num_clients, double p_min, RngStream rng);

/// Whether `client` returns its update in `round` (1-based). Bernoulli draws
/// use a substream keyed by (client, round) under `root`, so the answer does
/// not depend on call order or on other clients.
bool is_available(const AvailabilityModel& model, ClientId client, Round round,
                  const RngStream& root);

/// Every client always available except `stale_client`, which is available
/// only for the first total_rounds - stale_rounds rounds.
AvailabilityModel make_stale_trace(std::size_t num_clients, std::size_t total_rounds,
                                   ClientId stale_client, std::size_t stale_rounds);

/// CSV matrix without header: one row per client, one 0/1 column per round.
AvailabilityModel load_trace_csv(const std::filesystem::path& path);

}  // namespace fedar
