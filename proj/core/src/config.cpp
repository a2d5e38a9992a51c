#include "fedar/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "fedar/errors.hpp"

namespace fedar {
namespace {

using nlohmann::json;

// Literal JSON numbers parse as unsigned; values built in code may be signed.
bool is_nonnegative_integer(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

[[noreturn]] void fail(const std::string& path, std::string_view why) {
  throw ConfigError(fmt::format("{}: {}", path, why));
}

// Walks one JSON object, rejecting keys that no reader claimed.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(path_, "expected an object");
  }

  std::string child(std::string_view key) const { return fmt::format("{}.{}", path_, key); }

  const json* find(std::string_view key) {
    seen_.emplace(key);
    auto it = obj_.find(std::string(key));
    return it == obj_.end() ? nullptr : &*it;
  }

  void read(std::string_view key, std::size_t& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (is_nonnegative_integer(*v)) {
      out = v->get<std::size_t>();
    } else if (v->is_number_integer()) {
      fail(child(key), "expected a nonnegative integer");
    } else {
      fail(child(key), fmt::format("expected an integer, got {}", v->type_name()));
    }
  }

  void read(std::string_view key, std::uint64_t& out, int /*tag*/) {
    std::size_t tmp = out;
    read(key, tmp);
    out = tmp;
  }

  void read(std::string_view key, double& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_number()) fail(child(key), fmt::format("expected a number, got {}", v->type_name()));
    out = v->get<double>();
  }

  void read(std::string_view key, std::string& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_string()) fail(child(key), fmt::format("expected a string, got {}", v->type_name()));
    out = v->get<std::string>();
  }

  template <typename Enum, typename Parse>
  void read_enum(std::string_view key, Enum& out, Parse parse) {
    std::string name;
    if (find(key) == nullptr) return;
    read(key, name);
    try {
      out = parse(name);
    } catch (const ConfigError& e) {
      fail(child(key), e.what());
    }
  }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.contains(key)) fail(child(key), "unknown key");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

void read_cutoff(const json& doc, CutoffSchedule& cutoff) {
  ObjectReader r(doc, "config.cutoff");
  r.read_enum("kind", cutoff.kind, cutoff_kind_from_string);
  r.read("t0", cutoff.t0);
  r.read("b", cutoff.b);
  r.read("c", cutoff.c);
  r.finish();
}

void read_availability(const json& doc, AvailabilitySpec& spec) {
  ObjectReader r(doc, "config.availability");
  r.read_enum("kind", spec.kind, availability_source_from_string);
  r.read("path", spec.trace_path);
  r.read("client", spec.stale_client);
  r.read("stale_rounds", spec.stale_rounds);
  r.finish();
}

void read_model(const json& doc, ExperimentConfig& cfg) {
  ObjectReader r(doc, "config.model");
  r.read_enum("kind", cfg.model_kind, model_kind_from_string);
  r.read("hidden_dim", cfg.hidden_dim);
  r.read("weight_decay", cfg.weight_decay);
  r.finish();
}

void read_dataset(const json& doc, DatasetSpec& spec) {
  ObjectReader r(doc, "config.dataset");
  if (r.find("kind") == nullptr) fail("config.dataset.kind", "required");
  r.read_enum("kind", spec.kind, dataset_kind_from_string);
  r.read("test_fraction", spec.test_fraction);
  switch (spec.kind) {
    case DatasetKind::kSynthetic:
      r.read("num_classes", spec.num_classes);
      r.read("per_class", spec.per_class);
      r.read("input_dim", spec.input_dim);
      r.read("separation", spec.separation);
      break;
    case DatasetKind::kIdx:
      r.read("train_images", spec.train_images);
      r.read("train_labels", spec.train_labels);
      r.read("test_images", spec.test_images);
      r.read("test_labels", spec.test_labels);
      break;
    case DatasetKind::kCsv:
      r.read("train", spec.train_csv);
      r.read("test", spec.test_csv);
      break;
  }
  r.finish();
}

json read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: invalid JSON: {}", path.string(), e.what()));
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig cfg;
  ObjectReader r(doc, "config");
  r.read("strategy", cfg.strategy);
  r.read("num_clients", cfg.num_clients);
  if (r.find("rounds") == nullptr) fail("config.rounds", "required");
  r.read("rounds", cfg.rounds);
  r.read("local_steps", cfg.local_steps);
  r.read("batch_size", cfg.batch_size);
  r.read("eta0", cfg.eta0);
  r.read_enum("lr_schedule", cfg.lr_schedule, lr_schedule_from_string);
  r.read("lr_offset", cfg.lr_offset);
  r.read("rho", cfg.rho);
  r.read("psi_max", cfg.psi_max);
  if (const json* v = r.find("cutoff")) read_cutoff(*v, cfg.cutoff);
  r.read("p_min", cfg.p_min);
  if (const json* v = r.find("availability")) read_availability(*v, cfg.availability);
  if (const json* v = r.find("model")) read_model(*v, cfg);
  const json* dataset = r.find("dataset");
  if (dataset == nullptr) fail("config.dataset", "required");
  read_dataset(*dataset, cfg.dataset);
  r.read("classes_per_client", cfg.classes_per_client);
  r.read("client_test_fraction", cfg.client_test_fraction);
  r.read("fedavg_s_cap", cfg.fedavg_s_cap);
  r.read("server_lr", cfg.server_lr);
  r.read("seed", cfg.seed, 0);
  r.read("eval_every", cfg.eval_every);
  r.read("workers", cfg.workers);
  r.finish();

  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("config.{}", e.what()));
  }
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  return config_from_json(read_file(path));
}

json config_to_json(const ExperimentConfig& c) {
  json dataset = {{"kind", to_string(c.dataset.kind)}, {"test_fraction", c.dataset.test_fraction}};
  switch (c.dataset.kind) {
    case DatasetKind::kSynthetic:
      dataset["num_classes"] = c.dataset.num_classes;
      dataset["per_class"] = c.dataset.per_class;
      dataset["input_dim"] = c.dataset.input_dim;
      dataset["separation"] = c.dataset.separation;
      break;
    case DatasetKind::kIdx:
      dataset["train_images"] = c.dataset.train_images;
      dataset["train_labels"] = c.dataset.train_labels;
      dataset["test_images"] = c.dataset.test_images;
      dataset["test_labels"] = c.dataset.test_labels;
      break;
    case DatasetKind::kCsv:
      dataset["train"] = c.dataset.train_csv;
      dataset["test"] = c.dataset.test_csv;
      break;
  }

  json availability = {{"kind", to_string(c.availability.kind)}};
  switch (c.availability.kind) {
    case AvailabilitySource::kBernoulli:
      break;
    case AvailabilitySource::kTrace:
      availability["path"] = c.availability.trace_path;
      break;
    case AvailabilitySource::kStale:
      availability["client"] = c.availability.stale_client;
      availability["stale_rounds"] = c.availability.stale_rounds;
      break;
  }

  return json{
      {"strategy", c.strategy},
      {"num_clients", c.num_clients},
      {"rounds", c.rounds},
      {"local_steps", c.local_steps},
      {"batch_size", c.batch_size},
      {"eta0", c.eta0},
      {"lr_schedule", to_string(c.lr_schedule)},
      {"lr_offset", c.lr_offset},
      {"rho", c.rho},
      {"psi_max", c.psi_max},
      {"cutoff",
       {{"kind", to_string(c.cutoff.kind)}, {"t0", c.cutoff.t0}, {"b", c.cutoff.b}, {"c", c.cutoff.c}}},
      {"p_min", c.p_min},
      {"availability", availability},
      {"model",
       {{"kind", to_string(c.model_kind)},
        {"hidden_dim", c.hidden_dim},
        {"weight_decay", c.weight_decay}}},
      {"dataset", dataset},
      {"classes_per_client", c.classes_per_client},
      {"client_test_fraction", c.client_test_fraction},
      {"fedavg_s_cap", c.fedavg_s_cap},
      {"server_lr", c.server_lr},
      {"seed", c.seed},
      {"eval_every", c.eval_every},
      {"workers", c.workers},
  };
}

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kPMin:
      return "p_min";
    case SweepAxis::kNumClients:
      return "num_clients";
    case SweepAxis::kRho:
      return "rho";
  }
  return "p_min";
}

ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis, double value) {
  ExperimentConfig cfg = base;
  switch (axis) {
    case SweepAxis::kPMin:
      cfg.p_min = value;
      break;
    case SweepAxis::kNumClients:
      if (!(value >= 1.0) || value != std::floor(value)) {
        fail("sweep.axis.values", fmt::format("num_clients value {} is not a positive integer", value));
      }
      cfg.num_clients = static_cast<std::size_t>(value);
      break;
    case SweepAxis::kRho:
      cfg.rho = value;
      break;
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("sweep {}={}: {}", to_string(axis), value, e.what()));
  }
  return cfg;
}

SweepSpec sweep_from_json(const json& doc) {
  SweepSpec spec;
  ObjectReader r(doc, "sweep");
  const json* base = r.find("base");
  if (base == nullptr) fail("sweep.base", "required");
  spec.base = config_from_json(*base);

  const json* axis = r.find("axis");
  if (axis == nullptr) fail("sweep.axis", "required");
  {
    ObjectReader a(*axis, "sweep.axis");
    std::string name;
    a.read("name", name);
    if (name == "p_min") {
      spec.axis = SweepAxis::kPMin;
    } else if (name == "num_clients" || name == "N") {
      spec.axis = SweepAxis::kNumClients;
    } else if (name == "rho") {
      spec.axis = SweepAxis::kRho;
    } else {
      fail("sweep.axis.name", fmt::format("unknown axis '{}'", name));
    }
    const json* values = a.find("values");
    if (values == nullptr || !values->is_array() || values->empty()) {
      fail("sweep.axis.values", "expected a nonempty array of numbers");
    }
    for (const auto& v : *values) {
      if (!v.is_number()) fail("sweep.axis.values", "expected numbers");
      spec.values.push_back(v.get<double>());
    }
    a.finish();
  }

  if (const json* strategies = r.find("strategies")) {
    if (!strategies->is_array()) fail("sweep.strategies", "expected an array of names");
    for (const auto& s : *strategies) {
      if (!s.is_string() || !is_strategy_name(s.get<std::string>())) {
        fail("sweep.strategies", fmt::format("unknown strategy {}", s.dump()));
      }
      spec.strategies.push_back(s.get<std::string>());
    }
  } else {
    spec.strategies.push_back(spec.base.strategy);
  }

  if (const json* seeds = r.find("seeds")) {
    if (!seeds->is_array()) fail("sweep.seeds", "expected an array of integers");
    for (const auto& s : *seeds) {
      if (!is_nonnegative_integer(s)) fail("sweep.seeds", "expected nonnegative integers");
      spec.seeds.push_back(s.get<std::uint64_t>());
    }
  } else {
    spec.seeds.push_back(spec.base.seed);
  }
  if (spec.strategies.empty()) fail("sweep.strategies", "must not be empty");
  if (spec.seeds.empty()) fail("sweep.seeds", "must not be empty");
  r.finish();

  for (double v : spec.values) (void)apply_axis(spec.base, spec.axis, v);
  return spec;
}

SweepSpec parse_sweep(const std::filesystem::path& path) { return sweep_from_json(read_file(path)); }

}  // namespace fedar
