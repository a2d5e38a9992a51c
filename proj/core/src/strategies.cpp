#include "fedar/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "baselines.hpp"

namespace fedar {

std::string_view to_string(CutoffKind kind) {
  switch (kind) {
    case CutoffKind::kConvex:
      return "convex";
    case CutoffKind::kNonconvex:
      return "nonconvex";
    case CutoffKind::kInfinite:
      return "infinite";
  }
  return "convex";
}

CutoffKind cutoff_kind_from_string(std::string_view name) {
  if (name == "convex") return CutoffKind::kConvex;
  if (name == "nonconvex" || name == "non-convex") return CutoffKind::kNonconvex;
  if (name == "infinite" || name == "none") return CutoffKind::kInfinite;
  throw ConfigError(fmt::format("unknown cutoff kind '{}'", name));
}

void CutoffSchedule::validate() const {
  switch (kind) {
    case CutoffKind::kConvex:
      if (!(t0 > 0.0)) throw ConfigError("cutoff.t0 must be > 0");
      if (!(b > 2.0)) throw ConfigError("cutoff.b must be > 2 for the convex schedule");
      break;
    case CutoffKind::kNonconvex:
      if (!(t0 > 0.0)) throw ConfigError("cutoff.t0 must be > 0");
      if (!(c > 0.0)) throw ConfigError("cutoff.c must be > 0");
      break;
    case CutoffKind::kInfinite:
      break;
  }
}

double g_eval(const CutoffSchedule& g, Round round) {
  const auto t = static_cast<double>(round);
  switch (g.kind) {
    case CutoffKind::kConvex:
      return g.t0 + t / g.b;
    case CutoffKind::kNonconvex:
      return g.c * std::max(std::sqrt(t), std::sqrt(g.t0));
    case CutoffKind::kInfinite:
      return std::numeric_limits<double>::infinity();
  }
  return std::numeric_limits<double>::infinity();
}

double fedar_weight(std::size_t tau, Round round, double rho, double psi_max,
                    const CutoffSchedule& g) {
  const auto stale = static_cast<double>(tau);
  if (stale >= g_eval(g, round)) return 0.0;
  return std::min(std::pow(stale + 1.0, rho), psi_max);
}

// ---------------------------------------------------------------------------

FedArState::FedArState(std::size_t num_clients, std::size_t dim, double rho, double psi_max,
                       CutoffSchedule cutoff)
    : updates_(num_clients, ParamVector::Zero(static_cast<Eigen::Index>(dim))),
      tau_(num_clients, 0),
      observed_(num_clients, false),
      rho_(rho),
      psi_max_(psi_max),
      cutoff_(cutoff) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho must lie in [0, 1]");
  if (!(psi_max > 0.0)) throw ConfigError("psi_max must be > 0");
  cutoff_.validate();
  if (psi_max > 2.0) {
    spdlog::warn("psi_max = {} exceeds 2; the convergence guarantee no longer applies", psi_max);
  }
}

void FedArState::record(const ReceivedMap& received, const ParamVector& global, double eta) {
  if (!(eta >= 0.0)) throw ConfigError("FedAR needs a learning rate >= 0");
  for (const auto& [id, local] : received) {
    if (id >= updates_.size()) {
      throw ProtocolError(fmt::format("update from unknown client {}", id));
    }
    if (local.size() != global.size()) {
      throw ProtocolError(fmt::format("client {} sent a model of the wrong dimension", id));
    }
  }
  for (ClientId i = 0; i < updates_.size(); ++i) {
    const auto it = received.find(i);
    if (it == received.end()) {
      ++tau_[i];
      continue;
    }
    updates_[i] = normalized_update(global, it->second, eta);
    tau_[i] = 0;
    observed_[i] = true;
  }
}

double FedArState::weight(ClientId client, Round round) const {
  return fedar_weight(tau_[client], round, rho_, psi_max_, cutoff_);
}

std::size_t FedArState::observed_count() const {
  return static_cast<std::size_t>(std::count(observed_.begin(), observed_.end(), true));
}

FedArState::Step FedArState::aggregate_subset(const ParamVector& global, double eta,
                                              Round round,
                                              const std::vector<bool>& members) const {
  ParamVector sum = ParamVector::Zero(global.size());
  std::size_t contributors = 0;
  for (ClientId i = 0; i < updates_.size(); ++i) {
    if (!members[i] || !observed_[i]) continue;
    const double psi = weight(i, round);
    if (psi == 0.0) continue;
    sum += psi * updates_[i];
    ++contributors;
  }
  if (contributors == 0) return {global, 0};
  return {global - (eta / static_cast<double>(contributors)) * sum, contributors};
}

FedArState::Step FedArState::global_step(const ParamVector& global, double eta,
                                         Round round) const {
  return aggregate_subset(global, eta, round, std::vector<bool>(updates_.size(), true));
}

FedAr::FedAr(const StrategyOptions& options)
    : state_(options.num_clients, options.dim, options.rho, options.psi_max, options.cutoff) {}

ParamVector FedAr::aggregate(const ParamVector& global, const ReceivedMap& received,
                             const RoundContext& ctx) {
  state_.record(received, global, ctx.eta);
  auto step = state_.global_step(global, ctx.eta, ctx.round);
  contributors_ = step.contributors;
  if (step.contributors == 0) {
    spdlog::info("round {}: no contributing clients, global model unchanged", ctx.round);
  }
  return std::move(step.model);
}

// ---------------------------------------------------------------------------

bool is_strategy_name(std::string_view name) {
  return std::find(std::begin(kStrategyNames), std::end(kStrategyNames), name) !=
         std::end(kStrategyNames);
}

std::unique_ptr<Strategy> make_strategy(const StrategyOptions& options) {
  if (options.num_clients == 0) throw ConfigError("strategy needs at least one client");
  if (options.dim == 0) throw ConfigError("strategy needs a nonzero model dimension");
  const std::string& n = options.name;
  if (n == "fedar") return std::make_unique<FedAr>(options);
  if (n == "fedavg") return std::make_unique<FedAvg>();
  if (n == "fedavg_is") return std::make_unique<FedAvgIs>();
  if (n == "fedavg_s") {
    const std::size_t cap = options.s_cap != 0 ? options.s_cap : (options.num_clients + 1) / 2;
    return std::make_unique<FedAvgS>(cap);
  }
  if (n == "mifa") return std::make_unique<Mifa>(options.num_clients, options.dim);
  if (n == "fedvarp") {
    return std::make_unique<FedVarp>(options.num_clients, options.dim, options.server_lr);
  }
  if (n == "scaffold") {
    return std::make_unique<Scaffold>(options.num_clients, options.dim, options.local_steps);
  }
  throw ConfigError(fmt::format("unknown strategy '{}'", n));
}

}  // namespace fedar
