#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "fedar/availability.hpp"
#include "fedar/model.hpp"
#include "fedar/rng.hpp"
#include "fedar/strategies.hpp"

namespace fedar {

enum class LrSchedule { kConstant, kInverseT, kInverseSqrtT };

std::string_view to_string(LrSchedule schedule);
LrSchedule lr_schedule_from_string(std::string_view name);

/// constant: eta0; inverse_t: eta0 * a / (round + a); inverse_sqrt_t: eta0 / sqrt(round).
double lr_at(LrSchedule schedule, double eta0, Round round, double offset = 100.0);

enum class DatasetKind { kSynthetic, kIdx, kCsv };

std::string_view to_string(DatasetKind kind);
DatasetKind dataset_kind_from_string(std::string_view name);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kSynthetic;

  // synthetic
  std::size_t num_classes = 10;
  std::size_t per_class = 200;
  std::size_t input_dim = 20;
  double separation = 4.0;
  /// Share of a dataset held out as the global test set when no test file exists.
  double test_fraction = 0.2;

  // idx
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;

  // csv
  std::string train_csv;
  std::string test_csv;
};

enum class AvailabilitySource { kBernoulli, kTrace, kStale };

std::string_view to_string(AvailabilitySource source);
AvailabilitySource availability_source_from_string(std::string_view name);

struct AvailabilitySpec {
  AvailabilitySource kind = AvailabilitySource::kBernoulli;
  std::string trace_path;       // trace
  ClientId stale_client = 0;    // stale
  std::size_t stale_rounds = 0; // stale
};

struct ExperimentConfig {
  std::string strategy = "fedar";
  std::size_t num_clients = 100;
  std::size_t rounds = 0;
  std::size_t local_steps = 5;
  std::size_t batch_size = 64;
  double eta0 = 0.1;
  LrSchedule lr_schedule = LrSchedule::kConstant;
  double lr_offset = 100.0;
  double rho = 0.1;
  double psi_max = 2.0;
  CutoffSchedule cutoff;
  double p_min = 0.1;
  AvailabilitySpec availability;
  ModelKind model_kind = ModelKind::kLogisticRegression;
  std::size_t hidden_dim = 32;
  double weight_decay = 0.001;
  DatasetSpec dataset;
  std::size_t classes_per_client = 2;
  double client_test_fraction = 0.2;
  std::size_t fedavg_s_cap = 0;
  double server_lr = 1.0;
  std::uint64_t seed = 0;
  std::size_t eval_every = 1;
  std::size_t workers = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Metrics for one evaluated round.
struct RoundRecord {
  Round round = 0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  std::vector<ClientId> participating;
  std::size_t contributors = 0;
  double wall_time = 0.0;  // seconds; informational only
  bool evaluated = false;
};

struct ExperimentResult {
  std::vector<RoundRecord> rounds;
  ParamVector final_model;
  std::vector<double> client_accuracy;
  std::vector<double> probabilities;
  std::vector<std::size_t> participation;
  std::vector<std::size_t> train_sizes;
  std::vector<std::size_t> test_sizes;
};

/// One federated experiment, advanced a round at a time.
///
/// Construction loads and partitions the data, fixes client availability and
/// builds the strategy; nothing random happens afterwards except through
/// streams keyed by (purpose, client, round), so results do not depend on
/// the order or concurrency of local training.
class Simulation {
 public:
  explicit Simulation(ExperimentConfig config);
  ~Simulation();
  Simulation(Simulation&&) noexcept;
  Simulation& operator=(Simulation&&) noexcept;

  /// Runs round `t`: availability, local SGD on available clients, aggregation,
  /// and (on evaluation rounds) metrics.
  RoundRecord run_round(Round t);

  /// Runs every remaining round and collects the evaluated records.
  ExperimentResult run();

  bool is_eval_round(Round t) const;
  std::vector<ClientId> available_clients(Round t) const;
  std::vector<double> client_accuracies() const;

  const ExperimentConfig& config() const;
  const ModelSpec& model() const;
  const ParamVector& global_model() const;
  Strategy& strategy();
  const Strategy& strategy() const;
  const AvailabilityModel& availability() const;
  const Shard& train_union() const;
  const Shard& test_set() const;
  const std::vector<Shard>& client_train() const;
  const std::vector<Shard>& client_test() const;
  Round next_round() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace fedar
