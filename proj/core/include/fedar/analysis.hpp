#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fedar/engine.hpp"

namespace fedar {

/// Spread of per-client accuracy. All variances are population variances.
struct AccuracyStats {
  double mean = 0.0;
  double std = 0.0;
  double variance = 0.0;
  double worst10_mean = 0.0;
  double worst10_std = 0.0;
  double best10_mean = 0.0;
  double best10_std = 0.0;
  /// Clients in each decile group: max(1, floor(N / 10)).
  std::size_t decile_size = 0;
  /// Set when fewer than 10 clients were given.
  bool small_sample = false;
};

AccuracyStats accuracy_stats(std::span<const double> per_client_acc);

struct AccuracyHistogram {
  double bin_width = 0.0;
  std::vector<std::size_t> counts;  // bin k covers [k * w, (k + 1) * w); 1.0 lands in the last bin
  double bandwidth = 0.0;           // Gaussian KDE bandwidth
  std::vector<double> grid;         // 101 evaluation points
  std::vector<double> density;
};

/// Histogram over [0, 1] plus a Gaussian kernel density estimate with
/// Silverman's rule-of-thumb bandwidth. The density is sampled on 101 points
/// spanning [min - 5h, max + 5h]. When the sample has no spread the bandwidth
/// falls back to the bin width.
AccuracyHistogram histogram_pdf(std::span<const double> per_client_acc, double bin_width);

using Coalition = std::vector<bool>;
using CoalitionValue = std::function<double(const Coalition&)>;

inline constexpr std::size_t kMaxShapleyPlayers = 12;

struct ShapleyReport {
  std::vector<double> values;
  /// 100 * phi_i / (v(N) - v(empty)), or / sum(|phi|) when that total is <= 0.
  std::vector<double> percent;
  bool normalized_by_abs = false;
  double grand_value = 0.0;
  double empty_value = 0.0;
};

/// Exact Shapley values by enumerating all 2^n coalitions.
ShapleyReport shapley(const CoalitionValue& value, std::size_t num_players);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t df = 0;
  /// Differences had zero variance; p is 1 (zero mean) or 0 (nonzero mean).
  bool degenerate = false;
};

/// Two-sided paired t-test on a - b.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);

struct StalenessLevelResult {
  std::size_t stale_rounds = 0;
  std::string label;  // "fresh" or "stale <k>"
  ShapleyReport report;
  double base_accuracy = 0.0;  // test accuracy before the last aggregation
};

/// For each stale level, runs FedAR where `base.availability.stale_client`
/// drops out for the last `level` rounds (everyone else always available),
/// then values every coalition of stored updates in the final round by the
/// test-accuracy gain of aggregating only that coalition.
std::vector<StalenessLevelResult> staleness_contribution_experiment(
    const ExperimentConfig& base, std::span<const std::size_t> stale_levels);

}  // namespace fedar
