#include "fedar/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "fedar/errors.hpp"

namespace fedar {
namespace {

using RowMap = Eigen::Map<FeatureMatrix>;
using ConstRowMap = Eigen::Map<const FeatureMatrix>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

void check_inputs(const ModelSpec& model, const ParamVector& w, const Batch& batch) {
  if (static_cast<std::size_t>(w.size()) != model.param_count()) {
    throw ConfigError(fmt::format("parameter vector has {} entries, model expects {}",
                                  w.size(), model.param_count()));
  }
  if (static_cast<std::size_t>(batch.features.cols()) != model.input_dim) {
    throw ConfigError(fmt::format("batch has {} features, model expects {}",
                                  batch.features.cols(), model.input_dim));
  }
  if (static_cast<std::size_t>(batch.features.rows()) != batch.labels.size()) {
    throw ConfigError("batch feature rows and label count differ");
  }
  if (batch.labels.empty()) throw DataError("empty batch");
  for (int y : batch.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= model.num_classes) {
      throw ConfigError(fmt::format("label {} outside [0, {})", y, model.num_classes));
    }
  }
}

// Intermediate activations shared by the loss and gradient paths.
struct Forward {
  FeatureMatrix hidden;  // mlp only: tanh activations, n x H
  FeatureMatrix scores;  // n x C
};

Forward run_forward(const ModelSpec& model, const ParamVector& w,
                    const Eigen::Ref<const FeatureMatrix>& x) {
  const auto d = static_cast<Eigen::Index>(model.input_dim);
  const auto c = static_cast<Eigen::Index>(model.num_classes);
  Forward out;
  if (model.kind == ModelKind::kLogisticRegression) {
    ConstRowMap weights(w.data(), c, d);
    ConstVecMap bias(w.data() + c * d, c);
    out.scores = x * weights.transpose();
    out.scores.rowwise() += bias.transpose();
    return out;
  }
  const auto h = static_cast<Eigen::Index>(model.hidden_dim);
  const double* p = w.data();
  ConstRowMap w1(p, h, d);
  ConstVecMap b1(p + h * d, h);
  ConstRowMap w2(p + h * d + h, c, h);
  ConstVecMap b2(p + h * d + h + c * h, c);
  out.hidden = x * w1.transpose();
  out.hidden.rowwise() += b1.transpose();
  out.hidden = out.hidden.array().tanh().matrix();
  out.scores = out.hidden * w2.transpose();
  out.scores.rowwise() += b2.transpose();
  return out;
}

double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  const double m = row.maxCoeff();
  return m + std::log((row.array() - m).exp().sum());
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::kLogisticRegression ? "logistic_regression" : "mlp";
}

ModelKind model_kind_from_string(std::string_view name) {
  if (name == "logistic_regression" || name == "logistic-regression") {
    return ModelKind::kLogisticRegression;
  }
  if (name == "mlp") return ModelKind::kMlp;
  throw ConfigError(fmt::format("unknown model kind '{}'", name));
}

std::size_t ModelSpec::param_count() const {
  if (kind == ModelKind::kLogisticRegression) return num_classes * (input_dim + 1);
  return hidden_dim * (input_dim + 1) + num_classes * (hidden_dim + 1);
}

void ModelSpec::validate() const {
  if (input_dim == 0) throw ConfigError("model.input_dim must be >= 1");
  if (num_classes < 2) throw ConfigError("model.num_classes must be >= 2");
  if (kind == ModelKind::kMlp && hidden_dim == 0) {
    throw ConfigError("model.hidden_dim must be >= 1");
  }
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ConfigError("model.weight_decay must be a finite nonnegative number");
  }
}

ParamVector initial_params(const ModelSpec& model, RngStream rng) {
  model.validate();
  ParamVector w = ParamVector::Zero(static_cast<Eigen::Index>(model.param_count()));
  if (model.kind == ModelKind::kLogisticRegression) return w;

  const std::size_t d = model.input_dim;
  const std::size_t h = model.hidden_dim;
  const double r1 = 1.0 / std::sqrt(static_cast<double>(d));
  const double r2 = 1.0 / std::sqrt(static_cast<double>(h));
  const std::size_t first_layer = h * (d + 1);
  for (std::size_t i = 0; i < model.param_count(); ++i) {
    const double r = i < first_layer ? r1 : r2;
    w[static_cast<Eigen::Index>(i)] = rng.uniform(-r, r);
  }
  return w;
}

FeatureMatrix logits(const ModelSpec& model, const ParamVector& w,
                     const Eigen::Ref<const FeatureMatrix>& features) {
  return run_forward(model, w, features).scores;
}

double forward_loss(const ModelSpec& model, const ParamVector& w, const Batch& batch) {
  check_inputs(model, w, batch);
  const Forward fw = run_forward(model, w, batch.features);
  double total = 0.0;
  for (Eigen::Index r = 0; r < fw.scores.rows(); ++r) {
    total += log_sum_exp(fw.scores.row(r)) - fw.scores(r, batch.labels[r]);
  }
  const double n = static_cast<double>(batch.labels.size());
  return total / n + 0.5 * model.weight_decay * w.squaredNorm();
}

ParamVector gradient(const ModelSpec& model, const ParamVector& w, const Batch& batch) {
  check_inputs(model, w, batch);
  const Forward fw = run_forward(model, w, batch.features);
  const Eigen::Index n = fw.scores.rows();

  // dL/dscores = (softmax - onehot) / n
  FeatureMatrix delta(n, fw.scores.cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    const double lse = log_sum_exp(fw.scores.row(r));
    delta.row(r) = (fw.scores.row(r).array() - lse).exp().matrix();
    delta(r, batch.labels[r]) -= 1.0;
  }
  delta /= static_cast<double>(n);

  ParamVector grad = model.weight_decay * w;
  const auto d = static_cast<Eigen::Index>(model.input_dim);
  const auto c = static_cast<Eigen::Index>(model.num_classes);
  if (model.kind == ModelKind::kLogisticRegression) {
    RowMap(grad.data(), c, d).noalias() += delta.transpose() * batch.features;
    VecMap(grad.data() + c * d, c) += delta.colwise().sum().transpose();
    return grad;
  }

  const auto h = static_cast<Eigen::Index>(model.hidden_dim);
  double* g = grad.data();
  ConstRowMap w2(w.data() + h * d + h, c, h);
  RowMap(g + h * d + h, c, h).noalias() += delta.transpose() * fw.hidden;
  VecMap(g + h * d + h + c * h, c) += delta.colwise().sum().transpose();

  FeatureMatrix dhidden = delta * w2;
  dhidden.array() *= (1.0 - fw.hidden.array().square());
  RowMap(g, h, d).noalias() += dhidden.transpose() * batch.features;
  VecMap(g + h * d, h) += dhidden.colwise().sum().transpose();
  return grad;
}

std::vector<int> predict(const ModelSpec& model, const ParamVector& w,
                         const Eigen::Ref<const FeatureMatrix>& features) {
  const FeatureMatrix scores = logits(model, w, features);
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < scores.cols(); ++k) {
      if (scores(r, k) > scores(r, best)) best = k;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

double accuracy(const ModelSpec& model, const ParamVector& w, const Shard& dataset) {
  if (dataset.empty()) throw DataError("accuracy on an empty dataset");
  if (static_cast<std::size_t>(w.size()) != model.param_count() ||
      dataset.dim() != model.input_dim) {
    throw ConfigError("accuracy: dimension mismatch between model and data");
  }
  const std::vector<int> pred = predict(model, w, dataset.features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == dataset.labels[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

ParamVector local_sgd(const ModelSpec& model, const ParamVector& w0, const Shard& shard,
                      std::size_t steps, double eta, std::size_t batch_size,
                      RngStream rng, const ParamVector* correction) {
  if (shard.empty()) throw DataError("local_sgd on an empty shard");
  if (steps == 0) throw ConfigError("local_sgd requires at least one step");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (correction != nullptr && correction->size() != w0.size()) {
    throw ConfigError("gradient correction has the wrong dimension");
  }

  const std::size_t n = shard.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng.engine());
  std::size_t cursor = 0;

  ParamVector w = w0;
  FeatureMatrix xb;
  std::vector<int> yb;
  for (std::size_t k = 0; k < steps; ++k) {
    if (cursor == n) {
      std::shuffle(order.begin(), order.end(), rng.engine());
      cursor = 0;
    }
    const std::size_t m = std::min(batch_size, n - cursor);
    xb.resize(static_cast<Eigen::Index>(m), shard.features.cols());
    yb.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      const auto row = static_cast<Eigen::Index>(order[cursor + j]);
      xb.row(static_cast<Eigen::Index>(j)) = shard.features.row(row);
      yb[j] = shard.labels[order[cursor + j]];
    }
    cursor += m;

    ParamVector g = gradient(model, w, Batch(xb, yb));
    if (correction != nullptr) g += *correction;
    w -= eta * g;
  }
  return w;
}

bool all_finite(const ParamVector& w) { return w.allFinite(); }

}  // namespace fedar
