#include <fmt/format.h>

#include "fedar/analysis.hpp"
#include "fedar/errors.hpp"

namespace fedar {

std::vector<StalenessLevelResult> staleness_contribution_experiment(
    const ExperimentConfig& base, std::span<const std::size_t> stale_levels) {
  if (base.num_clients > kMaxShapleyPlayers) {
    throw CapacityError(fmt::format("staleness experiment supports at most {} clients",
                                    kMaxShapleyPlayers));
  }
  std::vector<StalenessLevelResult> out;
  out.reserve(stale_levels.size());
  for (std::size_t level : stale_levels) {
    ExperimentConfig cfg = base;
    cfg.strategy = "fedar";
    cfg.availability.kind = AvailabilitySource::kStale;
    cfg.availability.stale_rounds = level;

    Simulation sim(cfg);
    const Round last = cfg.rounds;
    for (Round t = 1; t < last; ++t) sim.run_round(t);
    const ParamVector before = sim.global_model();
    const double eta = lr_at(cfg.lr_schedule, cfg.eta0, last, cfg.lr_offset);
    sim.run_round(last);

    const auto& state = static_cast<const FedAr&>(sim.strategy()).state();
    const ModelSpec& model = sim.model();
    const Shard& test = sim.test_set();
    const double base_acc = accuracy(model, before, test);
    const CoalitionValue value = [&](const Coalition& members) {
      const auto step = state.aggregate_subset(before, eta, last, members);
      return accuracy(model, step.model, test) - base_acc;
    };

    StalenessLevelResult r;
    r.stale_rounds = level;
    r.label = level == 0 ? std::string("fresh") : fmt::format("stale {}", level);
    r.report = shapley(value, cfg.num_clients);
    r.base_accuracy = base_acc;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace fedar
