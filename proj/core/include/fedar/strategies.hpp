#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedar/errors.hpp"
#include "fedar/model.hpp"
#include "fedar/rng.hpp"

namespace fedar {

/// Local models w^i_{t,K} returned this round, keyed by client id. Ordered so
/// every aggregation sums clients in ascending id order.
using ReceivedMap = std::map<ClientId, ParamVector>;

// ---------------------------------------------------------------------------
// FedAR: stale-update approximation with staleness-weighted rectification.

enum class CutoffKind { kConvex, kNonconvex, kInfinite };

std::string_view to_string(CutoffKind kind);
CutoffKind cutoff_kind_from_string(std::string_view name);

/// Staleness cutoff g(t). Updates whose inactive-round count reaches g(t)
/// are dropped from aggregation.
///   convex:    g(t) = t0 + t / b           (b > 2)
///   nonconvex: g(t) = c * max(sqrt(t), sqrt(t0))
///   infinite:  g(t) = +inf
struct CutoffSchedule {
  CutoffKind kind = CutoffKind::kConvex;
  double t0 = 10.0;
  double b = 4.0;
  double c = 5.0;

  void validate() const;
};

double g_eval(const CutoffSchedule& g, Round round);

/// psi = 0 if tau >= g(round), else min((tau + 1)^rho, psi_max).
double fedar_weight(std::size_t tau, Round round, double rho, double psi_max,
                    const CutoffSchedule& g);

/// Server-side FedAR bookkeeping: the update matrix G (one normalized update
/// per client, zero until first seen), the inactive-round counts tau, and the
/// set E of clients ever observed.
class FedArState {
 public:
  struct Step {
    ParamVector model;
    std::size_t contributors = 0;  // N_t
  };

  FedArState(std::size_t num_clients, std::size_t dim, double rho, double psi_max,
             CutoffSchedule cutoff);

  /// G_i <- (global - w_i) / eta and tau_i <- 0 for received clients;
  /// tau_i += 1 for everyone else.
  void record(const ReceivedMap& received, const ParamVector& global, double eta);

  /// w - (eta / N_t) * sum_{i in E, psi_i > 0} psi_i * G_i. Returns `global`
  /// unchanged when N_t = 0.
  Step global_step(const ParamVector& global, double eta, Round round) const;

  /// Same rule restricted to clients with members[i] set.
  Step aggregate_subset(const ParamVector& global, double eta, Round round,
                        const std::vector<bool>& members) const;

  double weight(ClientId client, Round round) const;

  std::size_t num_clients() const { return updates_.size(); }
  const std::vector<ParamVector>& updates() const { return updates_; }
  const std::vector<std::size_t>& inactive_rounds() const { return tau_; }
  bool observed(ClientId client) const { return observed_[client]; }
  std::size_t observed_count() const;
  double rho() const { return rho_; }
  double psi_max() const { return psi_max_; }
  const CutoffSchedule& cutoff() const { return cutoff_; }

 private:
  std::vector<ParamVector> updates_;
  std::vector<std::size_t> tau_;
  std::vector<bool> observed_;
  double rho_;
  double psi_max_;
  CutoffSchedule cutoff_;
};

// ---------------------------------------------------------------------------
// Baselines

/// Plain average of the received models; `global` when none arrived.
ParamVector fedavg_step(const ReceivedMap& received, const ParamVector& global);

/// Received models weighted by 1/p_i, normalized over the received set.
ParamVector fedavg_is_step(const ReceivedMap& received, std::span<const double> probabilities,
                           const ParamVector& global);

/// Plain average over a uniform random subset of at most s_cap received clients.
ParamVector fedavg_s_step(const ReceivedMap& received, std::size_t s_cap, RngStream rng,
                          const ParamVector& global);

/// MIFA memory: the latest normalized update from every client.
struct MifaState {
  explicit MifaState(std::size_t num_clients, std::size_t dim);
  std::vector<ParamVector> updates;
};

/// w - (eta / N) * sum_i G_i over all N clients. Every client must report in
/// round 1.
ParamVector mifa_step(MifaState& state, const ReceivedMap& received, const ParamVector& global,
                      double eta, Round round);

struct FedVarpState {
  explicit FedVarpState(std::size_t num_clients, std::size_t dim);
  std::vector<ParamVector> stored;  // y_i
};

/// v = mean_i(y_i) + mean_{i in R}(Delta_i - y_i); w <- w - server_lr * eta * v;
/// then y_i <- Delta_i for received clients.
ParamVector fedvarp_step(FedVarpState& state, const ReceivedMap& received,
                         const ParamVector& global, double eta, double server_lr);

/// Scaffold control variates (option II).
struct ScaffoldState {
  ScaffoldState(std::size_t num_clients, std::size_t dim);

  /// c - c_i, added to each local gradient of client i.
  ParamVector correction(ClientId client) const;

  ParamVector c_global;
  std::vector<ParamVector> c_client;
};

/// Server side of a Scaffold round: given the participants' corrected local
/// models, update their control variates and return the averaged model.
ParamVector scaffold_absorb(ScaffoldState& state, const ReceivedMap& received,
                            const ParamVector& global, double eta, std::size_t local_steps);

/// One full Scaffold round including the participants' corrected local SGD.
/// Client i trains on shards[i] with stream root.derive("local", i, round).
ParamVector scaffold_round(ScaffoldState& state, std::span<const ClientId> participants,
                           const ParamVector& global, const ModelSpec& model,
                           std::span<const Shard> shards, double eta, std::size_t local_steps,
                           std::size_t batch_size, const RngStream& root, Round round);

// ---------------------------------------------------------------------------
// Uniform strategy interface

struct RoundContext {
  Round round = 1;
  double eta = 0.0;
  /// Availability probabilities as known to the simulator (FedAvg-IS only).
  std::span<const double> probabilities;
  /// Strategy-private randomness for this round.
  RngStream rng{0};
};

class Strategy {
 public:
  virtual ~Strategy() = default;

  virtual std::string_view name() const = 0;

  /// Combines this round's local models into the next global model.
  virtual ParamVector aggregate(const ParamVector& global, const ReceivedMap& received,
                                const RoundContext& ctx) = 0;

  /// Term added to client `client`'s local gradients, if the strategy uses one.
  virtual std::optional<ParamVector> local_correction(ClientId /*client*/) const {
    return std::nullopt;
  }

  /// True when every client must report in round 1 (MIFA).
  virtual bool requires_full_first_round() const { return false; }

  /// Number of clients that entered the last aggregation (N_t for FedAR).
  std::size_t contributors() const { return contributors_; }

 protected:
  std::size_t contributors_ = 0;
};

struct StrategyOptions {
  std::string name = "fedar";
  std::size_t num_clients = 0;
  std::size_t dim = 0;
  double rho = 0.1;
  double psi_max = 2.0;
  CutoffSchedule cutoff;
  /// FedAvg(S) subsample cap; 0 means ceil(N / 2).
  std::size_t s_cap = 0;
  double server_lr = 1.0;
  std::size_t local_steps = 5;
};

inline constexpr std::string_view kStrategyNames[] = {
    "fedar", "fedavg", "fedavg_is", "fedavg_s", "mifa", "fedvarp", "scaffold"};

bool is_strategy_name(std::string_view name);

std::unique_ptr<Strategy> make_strategy(const StrategyOptions& options);

class FedAr final : public Strategy {
 public:
  explicit FedAr(const StrategyOptions& options);
  std::string_view name() const override { return "fedar"; }
  ParamVector aggregate(const ParamVector& global, const ReceivedMap& received,
                        const RoundContext& ctx) override;
  const FedArState& state() const { return state_; }

 private:
  FedArState state_;
};

}  // namespace fedar
