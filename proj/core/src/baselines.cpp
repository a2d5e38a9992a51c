#include "baselines.hpp"

#include <algorithm>
#include <vector>

#include <fmt/format.h>

namespace fedar {
namespace {

void check_received(const ReceivedMap& received, const ParamVector& global,
                    std::size_t num_clients) {
  for (const auto& [id, local] : received) {
    if (id >= num_clients) throw ProtocolError(fmt::format("update from unknown client {}", id));
    if (local.size() != global.size()) {
      throw ProtocolError(fmt::format("client {} sent a model of the wrong dimension", id));
    }
  }
}

void require_nonnegative_eta(double eta, std::string_view who) {
  if (!(eta >= 0.0)) throw ConfigError(fmt::format("{} needs a learning rate >= 0", who));
}

}  // namespace

ParamVector normalized_update(const ParamVector& global, const ParamVector& local, double eta) {
  if (eta == 0.0) return ParamVector::Zero(global.size());
  return (global - local) / eta;
}

ParamVector fedavg_step(const ReceivedMap& received, const ParamVector& global) {
  if (received.empty()) return global;
  ParamVector sum = ParamVector::Zero(global.size());
  for (const auto& [id, local] : received) {
    if (local.size() != global.size()) {
      throw ProtocolError(fmt::format("client {} sent a model of the wrong dimension", id));
    }
    sum += local - global;
  }
  return global + sum / static_cast<double>(received.size());
}

ParamVector fedavg_is_step(const ReceivedMap& received, std::span<const double> probabilities,
                           const ParamVector& global) {
  if (received.empty()) return global;
  check_received(received, global, probabilities.size());
  double total = 0.0;
  for (const auto& entry : received) total += 1.0 / probabilities[entry.first];
  ParamVector shift = ParamVector::Zero(global.size());
  for (const auto& [id, local] : received) shift += ((1.0 / probabilities[id]) / total) * (local - global);
  return global + shift;
}

ParamVector fedavg_s_step(const ReceivedMap& received, std::size_t s_cap, RngStream rng,
                          const ParamVector& global) {
  if (s_cap == 0) throw ConfigError("FedAvg(S) cap must be >= 1");
  if (received.size() <= s_cap) return fedavg_step(received, global);
  std::vector<ClientId> ids;
  ids.reserve(received.size());
  for (const auto& entry : received) ids.push_back(entry.first);
  std::shuffle(ids.begin(), ids.end(), rng.engine());
  ids.resize(s_cap);
  ReceivedMap chosen;
  for (ClientId id : ids) chosen.emplace(id, received.at(id));
  return fedavg_step(chosen, global);
}

MifaState::MifaState(std::size_t num_clients, std::size_t dim)
    : updates(num_clients, ParamVector::Zero(static_cast<Eigen::Index>(dim))) {}

ParamVector mifa_step(MifaState& state, const ReceivedMap& received, const ParamVector& global,
                      double eta, Round round) {
  require_nonnegative_eta(eta, "MIFA");
  const std::size_t n = state.updates.size();
  check_received(received, global, n);
  if (round == 1 && received.size() != n) {
    throw ProtocolError(fmt::format("MIFA: only {} of {} clients responded in round 1",
                                    received.size(), n));
  }
  for (const auto& [id, local] : received) state.updates[id] = normalized_update(global, local, eta);
  ParamVector sum = ParamVector::Zero(global.size());
  for (const ParamVector& g : state.updates) sum += g;
  return global - (eta / static_cast<double>(n)) * sum;
}

FedVarpState::FedVarpState(std::size_t num_clients, std::size_t dim)
    : stored(num_clients, ParamVector::Zero(static_cast<Eigen::Index>(dim))) {}

ParamVector fedvarp_step(FedVarpState& state, const ReceivedMap& received,
                         const ParamVector& global, double eta, double server_lr) {
  require_nonnegative_eta(eta, "FedVARP");
  const std::size_t n = state.stored.size();
  check_received(received, global, n);

  ParamVector direction = ParamVector::Zero(global.size());
  for (const ParamVector& y : state.stored) direction += y;
  direction /= static_cast<double>(n);

  std::vector<std::pair<ClientId, ParamVector>> fresh;
  if (!received.empty()) {
    ParamVector correction = ParamVector::Zero(global.size());
    for (const auto& [id, local] : received) {
      ParamVector delta = normalized_update(global, local, eta);
      correction += delta - state.stored[id];
      fresh.emplace_back(id, std::move(delta));
    }
    direction += correction / static_cast<double>(received.size());
  }
  for (auto& [id, delta] : fresh) state.stored[id] = std::move(delta);
  return global - (server_lr * eta) * direction;
}

ScaffoldState::ScaffoldState(std::size_t num_clients, std::size_t dim)
    : c_global(ParamVector::Zero(static_cast<Eigen::Index>(dim))),
      c_client(num_clients, ParamVector::Zero(static_cast<Eigen::Index>(dim))) {}

ParamVector ScaffoldState::correction(ClientId client) const {
  return c_global - c_client.at(client);
}

ParamVector scaffold_absorb(ScaffoldState& state, const ReceivedMap& received,
                            const ParamVector& global, double eta, std::size_t local_steps) {
  require_nonnegative_eta(eta, "Scaffold");
  if (local_steps == 0) throw ConfigError("Scaffold needs local_steps >= 1");
  const std::size_t n = state.c_client.size();
  check_received(received, global, n);
  if (received.empty() || eta == 0.0) return global;

  const double scale = 1.0 / (static_cast<double>(local_steps) * eta);
  ParamVector model_delta = ParamVector::Zero(global.size());
  ParamVector variate_delta = ParamVector::Zero(global.size());
  for (const auto& [id, local] : received) {
    ParamVector updated = state.c_client[id] - state.c_global + scale * (global - local);
    variate_delta += updated - state.c_client[id];
    state.c_client[id] = std::move(updated);
    model_delta += local - global;
  }
  state.c_global += variate_delta / static_cast<double>(n);
  return global + model_delta / static_cast<double>(received.size());
}

ParamVector scaffold_round(ScaffoldState& state, std::span<const ClientId> participants,
                           const ParamVector& global, const ModelSpec& model,
                           std::span<const Shard> shards, double eta, std::size_t local_steps,
                           std::size_t batch_size, const RngStream& root, Round round) {
  ReceivedMap received;
  for (ClientId id : participants) {
    if (id >= shards.size()) throw ProtocolError(fmt::format("no shard for client {}", id));
    const ParamVector correction = state.correction(id);
    received.emplace(id, local_sgd(model, global, shards[id], local_steps, eta, batch_size,
                                   root.derive("local", id, round), &correction));
  }
  return scaffold_absorb(state, received, global, eta, local_steps);
}

// ---------------------------------------------------------------------------

ParamVector FedAvg::aggregate(const ParamVector& global, const ReceivedMap& received,
                              const RoundContext& /*ctx*/) {
  contributors_ = received.size();
  return fedavg_step(received, global);
}

ParamVector FedAvgIs::aggregate(const ParamVector& global, const ReceivedMap& received,
                                const RoundContext& ctx) {
  contributors_ = received.size();
  return fedavg_is_step(received, ctx.probabilities, global);
}

ParamVector FedAvgS::aggregate(const ParamVector& global, const ReceivedMap& received,
                               const RoundContext& ctx) {
  contributors_ = std::min(received.size(), cap_);
  return fedavg_s_step(received, cap_, ctx.rng, global);
}

ParamVector Mifa::aggregate(const ParamVector& global, const ReceivedMap& received,
                            const RoundContext& ctx) {
  contributors_ = state_.updates.size();
  return mifa_step(state_, received, global, ctx.eta, ctx.round);
}

ParamVector FedVarp::aggregate(const ParamVector& global, const ReceivedMap& received,
                               const RoundContext& ctx) {
  contributors_ = state_.stored.size();
  return fedvarp_step(state_, received, global, ctx.eta, server_lr_);
}

ParamVector Scaffold::aggregate(const ParamVector& global, const ReceivedMap& received,
                                const RoundContext& ctx) {
  contributors_ = received.size();
  return scaffold_absorb(state_, received, global, ctx.eta, local_steps_);
}

}  // namespace fedar
