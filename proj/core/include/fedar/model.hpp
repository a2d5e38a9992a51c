#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "fedar/rng.hpp"
#include "fedar/shard.hpp"

namespace fedar {

/// Flat model parameters. Length is fixed by the ModelSpec for the whole
/// experiment.
using ParamVector = Eigen::VectorXd;

enum class ModelKind { kLogisticRegression, kMlp };

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view name);

/// Multinomial logistic regression or a one-hidden-layer tanh MLP, both
/// trained with softmax cross-entropy plus coupled L2 weight decay.
///
/// Parameter layout (row-major blocks, concatenated):
///   logistic regression: W[C x D], b[C]
///   mlp:                 W1[H x D], b1[H], W2[C x H], b2[C]
struct ModelSpec {
  ModelKind kind = ModelKind::kLogisticRegression;
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  std::size_t hidden_dim = 32;
  double weight_decay = 0.0;

  std::size_t param_count() const;
  /// Throws ConfigError on zero dimensions or negative weight decay.
  void validate() const;
};

/// Non-owning view of a mini-batch.
struct Batch {
  Eigen::Ref<const FeatureMatrix> features;
  std::span<const int> labels;

  Batch(const FeatureMatrix& f, std::span<const int> l) : features(f), labels(l) {}
  explicit Batch(const Shard& shard) : features(shard.features), labels(shard.labels) {}
};

/// Zeros for logistic regression; U[-1/sqrt(fan_in), 1/sqrt(fan_in)] for the
/// MLP, drawn from `rng`.
ParamVector initial_params(const ModelSpec& model, RngStream rng);

/// Mean cross-entropy over the batch plus (weight_decay / 2) * ||w||^2.
double forward_loss(const ModelSpec& model, const ParamVector& w, const Batch& batch);

/// Analytic gradient of forward_loss with respect to w.
ParamVector gradient(const ModelSpec& model, const ParamVector& w, const Batch& batch);

/// Class scores (pre-softmax), one row per sample.
FeatureMatrix logits(const ModelSpec& model, const ParamVector& w,
                     const Eigen::Ref<const FeatureMatrix>& features);

/// Argmax class per sample; ties resolve to the lowest class index.
std::vector<int> predict(const ModelSpec& model, const ParamVector& w,
                         const Eigen::Ref<const FeatureMatrix>& features);

/// Fraction of samples whose predicted class equals the label.
double accuracy(const ModelSpec& model, const ParamVector& w, const Shard& dataset);

/// Runs exactly `steps` mini-batch SGD steps from w0 on `shard`.
///
/// Each epoch visits the shard in a fresh permutation drawn from `rng`; the
/// last batch of an epoch may be short. When `correction` is given it is
/// added to every stochastic gradient (used for control-variate methods).
ParamVector local_sgd(const ModelSpec& model, const ParamVector& w0, const Shard& shard,
                      std::size_t steps, double eta, std::size_t batch_size,
                      RngStream rng, const ParamVector* correction = nullptr);

bool all_finite(const ParamVector& w);

}  // namespace fedar
