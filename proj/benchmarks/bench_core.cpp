#include <benchmark/benchmark.h>

#include "fedar/analysis.hpp"
#include "fedar/data.hpp"
#include "fedar/engine.hpp"
#include "fedar/model.hpp"
#include "fedar/strategies.hpp"

namespace {

using namespace fedar;

ModelSpec spec_for(ModelKind kind, std::size_t dim, std::size_t classes) {
  ModelSpec m;
  m.kind = kind;
  m.input_dim = dim;
  m.num_classes = classes;
  m.hidden_dim = 32;
  m.weight_decay = 0.001;
  return m;
}

void BM_Gradient(benchmark::State& state) {
  const auto kind = state.range(0) == 0 ? ModelKind::kLogisticRegression : ModelKind::kMlp;
  const ModelSpec m = spec_for(kind, 20, 10);
  const Shard data = synth_classes(10, 64, 20, 4.0, RngStream(1));
  const ParamVector w = initial_params(m, RngStream(2));
  for (auto _ : state) benchmark::DoNotOptimize(gradient(m, w, Batch(data)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
}
BENCHMARK(BM_Gradient)->Arg(0)->Arg(1);

void BM_LocalSgd(benchmark::State& state) {
  const ModelSpec m = spec_for(ModelKind::kLogisticRegression, 20, 10);
  const Shard data = synth_classes(10, 20, 20, 4.0, RngStream(3));
  const ParamVector w = initial_params(m, RngStream(4));
  for (auto _ : state) {
    benchmark::DoNotOptimize(local_sgd(m, w, data, static_cast<std::size_t>(state.range(0)), 0.1, 64, RngStream(5)));
  }
}
BENCHMARK(BM_LocalSgd)->Arg(5)->Arg(50);

void BM_FedArAggregate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = 210;
  FedArState s(n, dim, 0.1, 2.0, CutoffSchedule{});
  RngStream rng(6);
  const ParamVector global = ParamVector::Zero(static_cast<Eigen::Index>(dim));
  ReceivedMap received;
  for (std::size_t i = 0; i < n; i += 2) {
    ParamVector w(static_cast<Eigen::Index>(dim));
    for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = rng.normal();
    received.emplace(static_cast<ClientId>(i), std::move(w));
  }
  s.record(received, global, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(s.global_step(global, 0.1, 10));
}
BENCHMARK(BM_FedArAggregate)->Arg(100)->Arg(1000);

void BM_Shapley(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const CoalitionValue value = [](const Coalition& s) {
    double v = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) v += s[i] ? static_cast<double>(i + 1) : 0.0;
    return v * v;
  };
  for (auto _ : state) benchmark::DoNotOptimize(shapley(value, n));
}
BENCHMARK(BM_Shapley)->Arg(5)->Arg(10)->Arg(12);

void BM_SimulationRound(benchmark::State& state) {
  ExperimentConfig c;
  c.rounds = 1000000;
  c.seed = 7;
  Simulation sim(c);
  Round t = 1;
  for (auto _ : state) benchmark::DoNotOptimize(sim.run_round(t++));
}
BENCHMARK(BM_SimulationRound);

}  // namespace

BENCHMARK_MAIN();
