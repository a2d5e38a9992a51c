#include "fedar/analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "fedar/errors.hpp"

namespace fedar {
namespace {

struct MeanStd {
  double mean;
  double std;
};

MeanStd population_mean_std(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / n)};
}

// Linear interpolation between order statistics (type 7).
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

AccuracyStats accuracy_stats(std::span<const double> per_client_acc) {
  if (per_client_acc.empty()) throw DataError("accuracy_stats needs at least one client");
  const std::size_t n = per_client_acc.size();

  AccuracyStats s;
  const MeanStd all = population_mean_std(per_client_acc);
  s.mean = all.mean;
  s.std = all.std;
  s.variance = all.std * all.std;
  s.small_sample = n < 10;
  s.decile_size = std::max<std::size_t>(1, n / 10);

  // Order by accuracy, ties by client id.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return per_client_acc[a] < per_client_acc[b];
  });
  std::vector<double> worst;
  std::vector<double> best;
  for (std::size_t k = 0; k < s.decile_size; ++k) {
    worst.push_back(per_client_acc[order[k]]);
    best.push_back(per_client_acc[order[n - 1 - k]]);
  }
  const MeanStd w = population_mean_std(worst);
  const MeanStd b = population_mean_std(best);
  s.worst10_mean = w.mean;
  s.worst10_std = w.std;
  s.best10_mean = b.mean;
  s.best10_std = b.std;
  return s;
}

AccuracyHistogram histogram_pdf(std::span<const double> per_client_acc, double bin_width) {
  if (per_client_acc.empty()) throw DataError("histogram of an empty accuracy vector");
  if (!(bin_width > 0.0 && bin_width <= 1.0)) throw ConfigError("bin_width must lie in (0, 1]");

  AccuracyHistogram h;
  h.bin_width = bin_width;
  const auto bins = static_cast<std::size_t>(std::ceil(1.0 / bin_width - 1e-9));
  h.counts.assign(bins, 0);
  for (double a : per_client_acc) {
    if (!(a >= 0.0 && a <= 1.0)) throw DataError(fmt::format("accuracy {} outside [0, 1]", a));
    const auto k = std::min(static_cast<std::size_t>(std::floor(a / bin_width + 1e-12)), bins - 1);
    ++h.counts[k];
  }

  std::vector<double> sorted(per_client_acc.begin(), per_client_acc.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  double spread = 0.0;
  if (n >= 2) {
    const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double x : sorted) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    const double iqr = (quantile(sorted, 0.75) - quantile(sorted, 0.25)) / 1.34;
    spread = (iqr > 0.0) ? std::min(sd, iqr) : sd;
  }
  h.bandwidth = spread > 0.0 ? 0.9 * spread * std::pow(static_cast<double>(n), -0.2) : bin_width;

  constexpr std::size_t kGridPoints = 101;
  const double lo = sorted.front() - 5.0 * h.bandwidth;
  const double hi = sorted.back() + 5.0 * h.bandwidth;
  const double norm = 1.0 / (static_cast<double>(n) * h.bandwidth * std::sqrt(2.0 * std::numbers::pi));
  h.grid.resize(kGridPoints);
  h.density.resize(kGridPoints);
  for (std::size_t g = 0; g < kGridPoints; ++g) {
    const double x = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(kGridPoints - 1);
    double sum = 0.0;
    for (double a : sorted) {
      const double z = (x - a) / h.bandwidth;
      sum += std::exp(-0.5 * z * z);
    }
    h.grid[g] = x;
    h.density[g] = norm * sum;
  }
  return h;
}

ShapleyReport shapley(const CoalitionValue& value, std::size_t num_players) {
  if (num_players == 0) throw ConfigError("shapley needs at least one player");
  if (num_players > kMaxShapleyPlayers) {
    throw CapacityError(fmt::format("exact Shapley supports at most {} players, got {}",
                                    kMaxShapleyPlayers, num_players));
  }
  const std::size_t n = num_players;
  const std::size_t subsets = std::size_t{1} << n;

  std::vector<double> v(subsets);
  Coalition members(n);
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    for (std::size_t i = 0; i < n; ++i) members[i] = (mask >> i) & 1U;
    v[mask] = value(members);
  }

  // weight[s] = s! (n - s - 1)! / n!
  std::vector<double> weight(n);
  for (std::size_t s = 0; s < n; ++s) {
    weight[s] = std::exp(std::lgamma(static_cast<double>(s) + 1.0) +
                         std::lgamma(static_cast<double>(n - s)) -
                         std::lgamma(static_cast<double>(n) + 1.0));
  }

  ShapleyReport r;
  r.values.assign(n, 0.0);
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    const auto size = static_cast<std::size_t>(std::popcount(mask));
    for (std::size_t i = 0; i < n; ++i) {
      if ((mask >> i) & 1U) continue;
      r.values[i] += weight[size] * (v[mask | (std::size_t{1} << i)] - v[mask]);
    }
  }
  r.grand_value = v[subsets - 1];
  r.empty_value = v[0];

  // The sum of the values equals v(N) - v(empty); using the difference directly
  // keeps rounding residue from posing as a tiny positive total.
  const double total = r.grand_value - r.empty_value;
  double denom = total;
  if (!(total > 0.0)) {
    r.normalized_by_abs = true;
    denom = 0.0;
    for (double phi : r.values) denom += std::abs(phi);
  }
  r.percent.assign(n, 0.0);
  if (denom > 0.0) {
    for (std::size_t i = 0; i < n; ++i) r.percent[i] = 100.0 * r.values[i] / denom;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Student t via the regularized incomplete beta function.

namespace {

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 1000;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw ConfigError("incomplete_beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("incomplete_beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw ConfigError("degrees of freedom must be > 0");
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  const double x = df / (df + t * t);
  return std::clamp(incomplete_beta(df / 2.0, 0.5, x), 0.0, 1.0);
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ConfigError("paired_t_test: series lengths differ");
  if (a.size() < 2) throw ConfigError("paired_t_test needs at least 2 pairs");
  const std::size_t n = a.size();
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
  const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double d : diff) ss += (d - mean) * (d - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  TTestResult r;
  r.df = n - 1;
  if (sd == 0.0) {
    r.degenerate = true;
    if (mean == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = std::copysign(std::numeric_limits<double>::infinity(), mean);
      r.p = 0.0;
    }
    return r;
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.p = student_t_two_sided_p(r.t, static_cast<double>(r.df));
  return r;
}

}  // namespace fedar
