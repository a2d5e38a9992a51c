#include "fedar/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <optional>
#include <thread>
#include <tuple>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "fedar/data.hpp"

namespace fedar {

std::string_view to_string(LrSchedule schedule) {
  switch (schedule) {
    case LrSchedule::kConstant:
      return "constant";
    case LrSchedule::kInverseT:
      return "inverse_t";
    case LrSchedule::kInverseSqrtT:
      return "inverse_sqrt_t";
  }
  return "constant";
}

LrSchedule lr_schedule_from_string(std::string_view name) {
  if (name == "constant") return LrSchedule::kConstant;
  if (name == "inverse_t") return LrSchedule::kInverseT;
  if (name == "inverse_sqrt_t") return LrSchedule::kInverseSqrtT;
  throw ConfigError(fmt::format("unknown lr_schedule '{}'", name));
}

double lr_at(LrSchedule schedule, double eta0, Round round, double offset) {
  const auto t = static_cast<double>(std::max<Round>(round, 1));
  switch (schedule) {
    case LrSchedule::kConstant:
      return eta0;
    case LrSchedule::kInverseT:
      return eta0 * offset / (t + offset);
    case LrSchedule::kInverseSqrtT:
      return eta0 / std::sqrt(t);
  }
  return eta0;
}

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kSynthetic:
      return "synthetic";
    case DatasetKind::kIdx:
      return "idx";
    case DatasetKind::kCsv:
      return "csv";
  }
  return "synthetic";
}

DatasetKind dataset_kind_from_string(std::string_view name) {
  if (name == "synthetic") return DatasetKind::kSynthetic;
  if (name == "idx") return DatasetKind::kIdx;
  if (name == "csv") return DatasetKind::kCsv;
  throw ConfigError(fmt::format("unknown dataset kind '{}'", name));
}

std::string_view to_string(AvailabilitySource source) {
  switch (source) {
    case AvailabilitySource::kBernoulli:
      return "bernoulli";
    case AvailabilitySource::kTrace:
      return "trace";
    case AvailabilitySource::kStale:
      return "stale";
  }
  return "bernoulli";
}

AvailabilitySource availability_source_from_string(std::string_view name) {
  if (name == "bernoulli") return AvailabilitySource::kBernoulli;
  if (name == "trace") return AvailabilitySource::kTrace;
  if (name == "stale") return AvailabilitySource::kStale;
  throw ConfigError(fmt::format("unknown availability kind '{}'", name));
}

void ExperimentConfig::validate() const {
  const auto fail = [](std::string_view field, std::string_view why) {
    throw ConfigError(fmt::format("{}: {}", field, why));
  };
  if (!is_strategy_name(strategy)) fail("strategy", fmt::format("unknown strategy '{}'", strategy));
  if (num_clients == 0) fail("num_clients", "must be >= 1");
  if (rounds == 0) fail("rounds", "must be >= 1");
  if (local_steps == 0) fail("local_steps", "must be >= 1");
  if (batch_size == 0) fail("batch_size", "must be >= 1");
  if (!(eta0 >= 0.0) || !std::isfinite(eta0)) fail("eta0", "must be a finite number >= 0");
  if (!(lr_offset > 0.0)) fail("lr_offset", "must be > 0");
  if (!(rho >= 0.0 && rho <= 1.0)) fail("rho", "must lie in [0, 1]");
  if (!(psi_max > 0.0)) fail("psi_max", "must be > 0");
  try {
    cutoff.validate();
  } catch (const ConfigError& e) {
    fail("cutoff", e.what());
  }
  if (!(p_min > 0.0 && p_min <= 1.0)) fail("p_min", "must lie in (0, 1]");
  if (classes_per_client == 0) fail("classes_per_client", "must be >= 1");
  if (!(client_test_fraction > 0.0 && client_test_fraction < 1.0)) {
    fail("client_test_fraction", "must lie strictly between 0 and 1");
  }
  if (eval_every == 0) fail("eval_every", "must be >= 1");
  if (workers == 0) fail("workers", "must be >= 1");
  if (!(server_lr > 0.0)) fail("server_lr", "must be > 0");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    fail("model.weight_decay", "must be a finite number >= 0");
  }
  if (model_kind == ModelKind::kMlp && hidden_dim == 0) fail("model.hidden_dim", "must be >= 1");

  switch (dataset.kind) {
    case DatasetKind::kSynthetic:
      if (dataset.num_classes < 2) fail("dataset.num_classes", "must be >= 2");
      if (dataset.per_class == 0) fail("dataset.per_class", "must be >= 1");
      if (dataset.input_dim == 0) fail("dataset.input_dim", "must be >= 1");
      if (!(dataset.separation >= 0.0)) fail("dataset.separation", "must be >= 0");
      break;
    case DatasetKind::kIdx:
      if (dataset.train_images.empty() || dataset.train_labels.empty()) {
        fail("dataset", "idx datasets need train_images and train_labels");
      }
      if (dataset.test_images.empty() != dataset.test_labels.empty()) {
        fail("dataset", "test_images and test_labels must be given together");
      }
      break;
    case DatasetKind::kCsv:
      if (dataset.train_csv.empty()) fail("dataset.train", "csv datasets need a train file");
      break;
  }
  if (!(dataset.test_fraction > 0.0 && dataset.test_fraction < 1.0)) {
    fail("dataset.test_fraction", "must lie strictly between 0 and 1");
  }

  switch (availability.kind) {
    case AvailabilitySource::kBernoulli:
      break;
    case AvailabilitySource::kTrace:
      if (availability.trace_path.empty()) fail("availability.path", "trace needs a path");
      break;
    case AvailabilitySource::kStale:
      if (availability.stale_client >= num_clients) {
        fail("availability.client", "must be < num_clients");
      }
      if (availability.stale_rounds > rounds) {
        fail("availability.stale_rounds", "must be <= rounds");
      }
      break;
  }
}

// ---------------------------------------------------------------------------

struct Simulation::Impl {
  ExperimentConfig config;
  RngStream root;
  ModelSpec model;
  Shard train_union;
  Shard test_set;
  std::vector<Shard> client_train;
  std::vector<Shard> client_test;
  AvailabilityModel availability;
  std::unique_ptr<Strategy> strategy;
  ParamVector global;
  Round next_round = 1;
  bool warned_first_round = false;

  explicit Impl(ExperimentConfig cfg) : config(std::move(cfg)), root(config.seed) {}

  void load_data();
  void build_availability();
  ReceivedMap train_clients(const std::vector<ClientId>& clients, Round t, double eta) const;
};

void Simulation::Impl::load_data() {
  const DatasetSpec& ds = config.dataset;
  Shard train;
  switch (ds.kind) {
    case DatasetKind::kSynthetic: {
      Shard all = synth_classes(ds.num_classes, ds.per_class, ds.input_dim, ds.separation,
                                root.derive("dataset"));
      std::tie(train, test_set) = train_test_split(all, ds.test_fraction, root.derive("global-split"));
      break;
    }
    case DatasetKind::kIdx:
      train = load_idx(ds.train_images, ds.train_labels);
      if (!ds.test_images.empty()) {
        test_set = load_idx(ds.test_images, ds.test_labels);
      } else {
        Shard all = std::move(train);
        std::tie(train, test_set) = train_test_split(all, ds.test_fraction, root.derive("global-split"));
      }
      break;
    case DatasetKind::kCsv:
      train = load_csv(ds.train_csv);
      if (!ds.test_csv.empty()) {
        test_set = load_csv(ds.test_csv);
      } else {
        Shard all = std::move(train);
        std::tie(train, test_set) = train_test_split(all, ds.test_fraction, root.derive("global-split"));
      }
      break;
  }
  if (train.empty() || test_set.empty()) throw DataError("dataset has no training or test rows");
  if (train.dim() != test_set.dim()) throw DataError("train and test feature dimensions differ");

  model.kind = config.model_kind;
  model.input_dim = train.dim();
  model.num_classes = static_cast<std::size_t>(
      std::max({label_bound(train), label_bound(test_set), 2}));
  model.hidden_dim = config.hidden_dim;
  model.weight_decay = config.weight_decay;
  model.validate();

  const PartitionPlan plan = shard_two_class(train, config.num_clients, config.classes_per_client,
                                             root.derive("partition"));
  client_train.reserve(config.num_clients);
  client_test.reserve(config.num_clients);
  for (ClientId i = 0; i < config.num_clients; ++i) {
    Shard own = subset(train, plan.assignments[i], static_cast<int>(i));
    auto [tr, te] = train_test_split(own, config.client_test_fraction,
                                     root.derive("client-split", i));
    client_train.push_back(std::move(tr));
    client_test.push_back(std::move(te));
  }
  train_union = concatenate(client_train);
}

void Simulation::Impl::build_availability() {
  const AvailabilitySpec& spec = config.availability;
  switch (spec.kind) {
    case AvailabilitySource::kBernoulli:
      availability = AvailabilityModel::bernoulli(
          sample_probabilities(config.num_clients, config.p_min, root.derive("availability-probs")));
      break;
    case AvailabilitySource::kTrace:
      availability = load_trace_csv(spec.trace_path);
      if (availability.num_clients() != config.num_clients) {
        throw ConfigError(fmt::format("trace has {} clients, config has {}",
                                      availability.num_clients(), config.num_clients));
      }
      if (availability.trace_length() < config.rounds) {
        throw ConfigError(fmt::format("trace covers {} rounds, config needs {}",
                                      availability.trace_length(), config.rounds));
      }
      break;
    case AvailabilitySource::kStale:
      availability = make_stale_trace(config.num_clients, config.rounds, spec.stale_client,
                                      spec.stale_rounds);
      break;
  }
}

ReceivedMap Simulation::Impl::train_clients(const std::vector<ClientId>& clients, Round t,
                                            double eta) const {
  std::vector<ParamVector> results(clients.size());
  std::vector<std::optional<ParamVector>> corrections(clients.size());
  for (std::size_t k = 0; k < clients.size(); ++k) {
    corrections[k] = strategy->local_correction(clients[k]);
  }
  const auto work = [&](std::size_t k) {
    const ClientId id = clients[k];
    const ParamVector* corr = corrections[k] ? &*corrections[k] : nullptr;
    results[k] = local_sgd(model, global, client_train[id], config.local_steps, eta,
                           config.batch_size, root.derive("local", id, t), corr);
  };

  const std::size_t workers = std::min(config.workers, clients.size());
  if (workers <= 1) {
    for (std::size_t k = 0; k < clients.size(); ++k) work(k);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t k = w; k < clients.size(); k += workers) work(k);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  ReceivedMap received;
  for (std::size_t k = 0; k < clients.size(); ++k) received.emplace(clients[k], std::move(results[k]));
  return received;
}

Simulation::Simulation(ExperimentConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
  Impl& s = *impl_;
  s.config.validate();
  s.load_data();
  s.build_availability();

  StrategyOptions opts;
  opts.name = s.config.strategy;
  opts.num_clients = s.config.num_clients;
  opts.dim = s.model.param_count();
  opts.rho = s.config.rho;
  opts.psi_max = s.config.psi_max;
  opts.cutoff = s.config.cutoff;
  opts.s_cap = s.config.fedavg_s_cap;
  opts.server_lr = s.config.server_lr;
  opts.local_steps = s.config.local_steps;
  s.strategy = make_strategy(opts);
  s.global = initial_params(s.model, s.root.derive("init"));
}

Simulation::~Simulation() = default;
Simulation::Simulation(Simulation&&) noexcept = default;
Simulation& Simulation::operator=(Simulation&&) noexcept = default;

bool Simulation::is_eval_round(Round t) const {
  return t % impl_->config.eval_every == 0 || t == impl_->config.rounds;
}

std::vector<ClientId> Simulation::available_clients(Round t) const {
  const Impl& s = *impl_;
  std::vector<ClientId> out;
  if (t == 1 && s.strategy->requires_full_first_round()) {
    out.resize(s.config.num_clients);
    for (ClientId i = 0; i < out.size(); ++i) out[i] = i;
    return out;
  }
  const RngStream draws = s.root.derive("availability-draws");
  for (ClientId i = 0; i < s.config.num_clients; ++i) {
    if (is_available(s.availability, i, t, draws)) out.push_back(i);
  }
  return out;
}

RoundRecord Simulation::run_round(Round t) {
  Impl& s = *impl_;
  if (t == 0 || t > s.config.rounds) {
    throw ConfigError(fmt::format("round {} outside 1..{}", t, s.config.rounds));
  }
  const auto start = std::chrono::steady_clock::now();
  if (t == 1 && s.strategy->requires_full_first_round() && !s.warned_first_round) {
    spdlog::warn("{} requires every client in round 1; overriding availability",
                 s.strategy->name());
    s.warned_first_round = true;
  }

  const double eta = lr_at(s.config.lr_schedule, s.config.eta0, t, s.config.lr_offset);
  RoundRecord record;
  record.round = t;
  record.participating = available_clients(t);
  const ReceivedMap received = s.train_clients(record.participating, t, eta);

  RoundContext ctx;
  ctx.round = t;
  ctx.eta = eta;
  ctx.probabilities = s.availability.probabilities();
  ctx.rng = s.root.derive("strategy", t);
  try {
    s.global = s.strategy->aggregate(s.global, received, ctx);
  } catch (const ProtocolError& e) {
    throw ProtocolError(fmt::format("round {}: {}", t, e.what()));
  }
  if (!all_finite(s.global)) {
    throw DataError(fmt::format("round {}: global model became non-finite", t));
  }
  record.contributors = s.strategy->contributors();
  s.next_round = t + 1;

  if (is_eval_round(t)) {
    record.train_loss = forward_loss(s.model, s.global, Batch(s.train_union));
    record.test_accuracy = accuracy(s.model, s.global, s.test_set);
    record.evaluated = true;
  }
  record.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

std::vector<double> Simulation::client_accuracies() const {
  std::vector<double> out;
  out.reserve(impl_->client_test.size());
  for (const Shard& test : impl_->client_test) {
    out.push_back(accuracy(impl_->model, impl_->global, test));
  }
  return out;
}

ExperimentResult Simulation::run() {
  Impl& s = *impl_;
  ExperimentResult result;
  result.participation.assign(s.config.num_clients, 0);
  for (Round t = s.next_round; t <= s.config.rounds; ++t) {
    RoundRecord rec = run_round(t);
    for (ClientId id : rec.participating) ++result.participation[id];
    if (rec.evaluated) result.rounds.push_back(std::move(rec));
  }
  result.final_model = s.global;
  result.client_accuracy = client_accuracies();
  result.probabilities = s.availability.probabilities();
  for (ClientId i = 0; i < s.config.num_clients; ++i) {
    result.train_sizes.push_back(s.client_train[i].size());
    result.test_sizes.push_back(s.client_test[i].size());
  }
  return result;
}

const ExperimentConfig& Simulation::config() const { return impl_->config; }
const ModelSpec& Simulation::model() const { return impl_->model; }
const ParamVector& Simulation::global_model() const { return impl_->global; }
Strategy& Simulation::strategy() { return *impl_->strategy; }
const Strategy& Simulation::strategy() const { return *impl_->strategy; }
const AvailabilityModel& Simulation::availability() const { return impl_->availability; }
const Shard& Simulation::train_union() const { return impl_->train_union; }
const Shard& Simulation::test_set() const { return impl_->test_set; }
const std::vector<Shard>& Simulation::client_train() const { return impl_->client_train; }
const std::vector<Shard>& Simulation::client_test() const { return impl_->client_test; }
Round Simulation::next_round() const { return impl_->next_round; }

ExperimentResult run_experiment(const ExperimentConfig& config) {
  Simulation sim(config);
  return sim.run();
}

}  // namespace fedar
