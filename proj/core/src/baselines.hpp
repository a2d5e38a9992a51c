#pragma once

#include "fedar/strategies.hpp"

namespace fedar {

/// (global - local) / eta. A zero learning rate means no local progress, so
/// the stored update is zero rather than 0 / 0.
ParamVector normalized_update(const ParamVector& global, const ParamVector& local, double eta);

class FedAvg final : public Strategy {
 public:
  std::string_view name() const override { return "fedavg"; }
  ParamVector aggregate(const ParamVector& global, const ReceivedMap& received,
                        const RoundContext& ctx) override;
};

class FedAvgIs final : public Strategy {
 public:
  std::string_view name() const override { return "fedavg_is"; }
  ParamVector aggregate(const ParamVector& global, const ReceivedMap& received,
                        const RoundContext& ctx) override;
};

class FedAvgS final : public Strategy {
 public:
  explicit FedAvgS(std::size_t cap) : cap_(cap) {}
  std::string_view name() const override { return "fedavg_s"; }
  ParamVector aggregate(const ParamVector& global, const ReceivedMap& received,
                        const RoundContext& ctx) override;

 private:
  std::size_t cap_;
};

class Mifa final : public Strategy {
 public:
  Mifa(std::size_t num_clients, std::size_t dim) : state_(num_clients, dim) {}
  std::string_view name() const override { return "mifa"; }
  ParamVector aggregate(const ParamVector& global, const ReceivedMap& received,
                        const RoundContext& ctx) override;
  bool requires_full_first_round() const override { return true; }

 private:
  MifaState state_;
};

class FedVarp final : public Strategy {
 public:
  FedVarp(std::size_t num_clients, std::size_t dim, double server_lr)
      : state_(num_clients, dim), server_lr_(server_lr) {}
  std::string_view name() const override { return "fedvarp"; }
  ParamVector aggregate(const ParamVector& global, const ReceivedMap& received,
                        const RoundContext& ctx) override;

 private:
  FedVarpState state_;
  double server_lr_;
};

class Scaffold final : public Strategy {
 public:
  Scaffold(std::size_t num_clients, std::size_t dim, std::size_t local_steps)
      : state_(num_clients, dim), local_steps_(local_steps) {}
  std::string_view name() const override { return "scaffold"; }
  ParamVector aggregate(const ParamVector& global, const ReceivedMap& received,
                        const RoundContext& ctx) override;
  std::optional<ParamVector> local_correction(ClientId client) const override {
    return state_.correction(client);
  }

 private:
  ScaffoldState state_;
  std::size_t local_steps_;
};

}  // namespace fedar
