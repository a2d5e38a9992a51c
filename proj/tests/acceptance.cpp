// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "fedar/analysis.hpp"
#include "fedar/commands.hpp"
#include "fedar/data.hpp"
#include "fedar/engine.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace fedar;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_seconds;
  std::function<Outcome()> check;
};

double max_abs_diff(const ParamVector& a, const ParamVector& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / fmt::format("fedar-acceptance-{}", name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double mean(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// 10-class Gaussian blobs, N = 100 two-class clients, K = 5, batch 64, eta 0.1.
ExperimentConfig synthetic_workload(const std::string& strategy, std::uint64_t seed) {
  ExperimentConfig c;
  c.strategy = strategy;
  c.seed = seed;
  c.rounds = 200;
  c.p_min = 0.1;
  return c;
}

// ---------------------------------------------------------------------------

Outcome reduction_equivalence() {
  double worst = 0.0;
  for (ModelKind kind : {ModelKind::kLogisticRegression, ModelKind::kMlp}) {
    ExperimentConfig a;
    a.num_clients = 20;
    a.rounds = 50;
    a.p_min = 1.0;
    a.model_kind = kind;
    a.hidden_dim = 16;
    a.seed = 7;
    ExperimentConfig b = a;
    b.strategy = "fedavg";
    Simulation fedar(a);
    Simulation fedavg(b);
    for (Round t = 1; t <= 50; ++t) {
      fedar.run_round(t);
      fedavg.run_round(t);
      worst = std::max(worst, max_abs_diff(fedar.global_model(), fedavg.global_model()));
    }
  }
  return {worst < 1e-12, fmt::format("max-norm diff over 50 rounds = {:.3e} (tol 1e-12)", worst)};
}

Outcome mifa_equivalence() {
  const fs::path dir = scratch_dir("mifa");
  const std::size_t n = 10;
  const std::size_t rounds = 50;
  double worst = 0.0;
  bool exact = true;
  for (int trace = 0; trace < 3; ++trace) {
    RngStream rng = RngStream(100 + trace).derive("trace");
    const fs::path path = dir / fmt::format("trace{}.csv", trace);
    {
      std::ofstream out(path);
      for (std::size_t i = 0; i < n; ++i) {
        const double p = rng.uniform(0.1, 1.0);
        for (std::size_t t = 0; t < rounds; ++t) {
          out << (t == 0 || rng.uniform() < p ? 1 : 0) << (t + 1 < rounds ? "," : "\n");
        }
      }
    }
    ExperimentConfig a;
    a.num_clients = n;
    a.rounds = rounds;
    a.seed = 200 + trace;
    a.availability.kind = AvailabilitySource::kTrace;
    a.availability.trace_path = path.string();
    a.rho = 0.0;
    a.cutoff.kind = CutoffKind::kInfinite;
    ExperimentConfig b = a;
    b.strategy = "mifa";
    Simulation fedar(a);
    Simulation mifa(b);
    for (Round t = 1; t <= rounds; ++t) {
      fedar.run_round(t);
      mifa.run_round(t);
      const double d = max_abs_diff(fedar.global_model(), mifa.global_model());
      worst = std::max(worst, d);
      exact = exact && d == 0.0;
    }
  }
  fs::remove_all(dir);
  return {exact, fmt::format("3 traces x 50 rounds, max-norm diff = {:.3e} (exact equality required)", worst)};
}

Outcome gradient_correctness() {
  RngStream root(31);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    RngStream r = root.derive("trial", static_cast<std::uint64_t>(trial));
    ModelSpec m;
    m.kind = trial % 2 == 0 ? ModelKind::kLogisticRegression : ModelKind::kMlp;
    m.input_dim = 2 + r.engine()() % 5;
    m.num_classes = 2 + r.engine()() % 4;
    m.hidden_dim = 2 + r.engine()() % 5;
    m.weight_decay = (trial % 3) * 0.01;
    const Shard batch = oracle::random_shard(r.derive("data"), 1 + r.engine()() % 12, m.input_dim,
                                             m.num_classes);
    const ParamVector w = oracle::random_params(r.derive("w"), m.param_count());
    const ParamVector g = gradient(m, w, Batch(batch));
    const ParamVector fd = oracle::fd_gradient(m, w, batch);
    const double rel = (g - fd).norm() / std::max(1e-12, std::max(g.norm(), fd.norm()));
    worst = std::max(worst, rel);
  }
  return {worst < 1e-4, fmt::format("100 checks, worst relative error = {:.3e} (tol 1e-4)", worst)};
}

// Mean training loss over the last 50 rounds.
double smoothed_final_loss(const ExperimentResult& r) {
  const std::size_t window = 50;
  double sum = 0.0;
  for (std::size_t i = r.rounds.size() - window; i < r.rounds.size(); ++i) sum += r.rounds[i].train_loss;
  return sum / static_cast<double>(window);
}

Outcome convex_trend() {
  const auto config = [](const std::string& strategy, double p_min, std::uint64_t seed) {
    ExperimentConfig c;
    c.strategy = strategy;
    c.num_clients = 20;
    c.rounds = 500;
    c.p_min = p_min;
    c.seed = seed;
    c.lr_schedule = LrSchedule::kInverseT;
    c.dataset.num_classes = 2;
    c.dataset.per_class = 400;
    c.classes_per_client = 2;
    return c;
  };
  std::vector<double> fedar, full, received;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    fedar.push_back(smoothed_final_loss(run_experiment(config("fedar", 0.1, seed))));
    full.push_back(smoothed_final_loss(run_experiment(config("fedavg", 1.0, seed))));
    received.push_back(smoothed_final_loss(run_experiment(config("fedavg", 0.1, seed))));
  }
  const double lf = mean(fedar);
  const double lfull = mean(full);
  const double lrec = mean(received);
  const bool pass = std::abs(lf - lfull) <= 0.1 * lfull && lf < lrec;
  return {pass, fmt::format("smoothed loss: fedar {:.6f}, full-participation fedavg {:.6f} (ratio {:.4f}), "
                            "fedavg on received {:.6f}",
                            lf, lfull, lf / lfull, lrec)};
}

struct SeriesRun {
  std::vector<double> final_acc;
  std::vector<double> curve;  // test accuracy per round, seeds concatenated
  std::vector<double> client_var;
};

SeriesRun run_seeds(const std::string& strategy) {
  SeriesRun s;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ExperimentResult r = run_experiment(synthetic_workload(strategy, seed));
    s.final_acc.push_back(r.rounds.back().test_accuracy);
    for (const auto& rec : r.rounds) s.curve.push_back(rec.test_accuracy);
    s.client_var.push_back(accuracy_stats(r.client_accuracy).variance);
  }
  return s;
}

Outcome comparative_ordering() {
  const SeriesRun fedar = run_seeds("fedar");
  const SeriesRun is = run_seeds("fedavg_is");
  const SeriesRun s = run_seeds("fedavg_s");
  const double a = mean(fedar.final_acc);
  const double b = mean(is.final_acc);
  const double c = mean(s.final_acc);
  const TTestResult t_is = paired_t_test(fedar.curve, is.curve);
  const TTestResult t_s = paired_t_test(fedar.curve, s.curve);
  const auto favours_fedar = [](const TTestResult& t) { return t.t > 0.0 && t.p < 0.05; };
  const bool pass = a >= b && a >= c && (favours_fedar(t_is) || favours_fedar(t_s));
  return {pass, fmt::format("final acc: fedar {:.4f}, fedavg_is {:.4f}, fedavg_s {:.4f}; "
                            "paired curves vs is: t = {:.3g}, p = {:.3g}; vs s: t = {:.3g}, p = {:.3g}",
                            a, b, c, t_is.t, t_is.p, t_s.t, t_s.p)};
}

Outcome bias_direction() {
  const double a = mean(run_seeds("fedar").client_var);
  const double b = mean(run_seeds("fedvarp").client_var);
  return {a <= b, fmt::format("per-client accuracy variance: fedar {:.6f}, fedvarp {:.6f}", a, b)};
}

std::vector<double> permutation_shapley(const std::vector<double>& table, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> phi(n, 0.0);
  double perms = 0.0;
  do {
    std::size_t mask = 0;
    for (std::size_t i : order) {
      const std::size_t next = mask | (std::size_t{1} << i);
      phi[i] += table[next] - table[mask];
      mask = next;
    }
    perms += 1.0;
  } while (std::next_permutation(order.begin(), order.end()));
  for (double& p : phi) p /= perms;
  return phi;
}

Outcome shapley_axioms() {
  std::mt19937_64 gen(41);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst_axiom = 0.0;
  double worst_brute = 0.0;
  for (int game = 0; game < 50; ++game) {
    const std::size_t n = 4 + static_cast<std::size_t>(game % 5);
    std::vector<double> table(std::size_t{1} << n);
    for (double& x : table) x = u(gen);
    // Player 0 is null; players 1 and 2 are interchangeable.
    for (std::size_t mask = 0; mask < table.size(); ++mask) {
      if (mask & 1U) table[mask] = table[mask & ~std::size_t{1}];
    }
    for (std::size_t mask = 0; mask < table.size(); ++mask) {
      if ((mask & 2U) && !(mask & 4U)) table[mask] = table[(mask & ~std::size_t{2}) | 4U];
    }
    const CoalitionValue value = [&](const Coalition& s) {
      std::size_t mask = 0;
      for (std::size_t i = 0; i < s.size(); ++i) mask |= s[i] ? (std::size_t{1} << i) : 0;
      return table[mask];
    };
    const ShapleyReport r = shapley(value, n);
    const double sum = std::accumulate(r.values.begin(), r.values.end(), 0.0);
    worst_axiom = std::max({worst_axiom, std::abs(sum - (table.back() - table.front())),
                            std::abs(r.values[0]), std::abs(r.values[1] - r.values[2])});
    const std::vector<double> brute = permutation_shapley(table, n);
    for (std::size_t i = 0; i < n; ++i) worst_brute = std::max(worst_brute, std::abs(r.values[i] - brute[i]));
  }
  return {worst_axiom < 1e-9 && worst_brute < 1e-9,
          fmt::format("50 games, worst axiom residual {:.3e}, worst brute-force diff {:.3e} (tol 1e-9)",
                      worst_axiom, worst_brute)};
}

Outcome staleness_trend() {
  const std::vector<std::size_t> levels{0, 1, 2, 3, 4, 5};
  std::vector<double> phi(levels.size(), 0.0);
  const std::size_t seeds = 10;
  for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
    ExperimentConfig c;
    c.num_clients = 5;
    c.rounds = 9;
    c.seed = seed;
    c.availability.stale_client = 0;
    const auto results = staleness_contribution_experiment(c, levels);
    for (std::size_t l = 0; l < levels.size(); ++l) phi[l] += results[l].report.values[0] / seeds;
  }
  bool monotone = true;
  for (std::size_t l = 1; l < phi.size(); ++l) monotone = monotone && phi[l] <= phi[l - 1];
  std::string seq;
  for (std::size_t l = 0; l < phi.size(); ++l) seq += fmt::format("{}{:.5f}", l ? ", " : "", phi[l]);
  return {monotone, fmt::format("stale-client mean phi fresh..stale 5: [{}]", seq)};
}

Outcome weight_function() {
  using oracle::HighPrec;
  std::mt19937_64 gen(51);
  std::uniform_int_distribution<std::size_t> tau_d(0, 60);
  std::uniform_real_distribution<double> rho_d(0.0, 1.0);
  std::uniform_int_distribution<Round> t_d(1, 400);
  double worst = 0.0;
  std::size_t capped = 0;
  std::size_t cut = 0;
  for (int k = 0; k < 1000; ++k) {
    CutoffSchedule g;
    g.kind = k % 3 == 0 ? CutoffKind::kConvex : (k % 3 == 1 ? CutoffKind::kNonconvex : CutoffKind::kInfinite);
    const std::size_t tau = tau_d(gen);
    const double rho = rho_d(gen);
    const Round t = t_d(gen);
    HighPrec cutoff;
    bool finite = true;
    if (g.kind == CutoffKind::kConvex) {
      cutoff = HighPrec(g.t0) + HighPrec(t) / HighPrec(g.b);
    } else if (g.kind == CutoffKind::kNonconvex) {
      cutoff = HighPrec(g.c) * boost::multiprecision::sqrt(HighPrec(std::max<double>(t, g.t0)));
    } else {
      finite = false;
    }
    HighPrec expected = 0;
    if (finite && HighPrec(tau) >= cutoff) {
      ++cut;
    } else {
      expected = boost::multiprecision::pow(HighPrec(tau + 1), HighPrec(rho));
      if (expected > HighPrec(2)) {
        expected = 2;
        ++capped;
      }
    }
    const double got = fedar_weight(tau, t, rho, 2.0, g);
    worst = std::max(worst, std::abs(got - expected.convert_to<double>()));
  }
  const bool pass = worst <= 1e-12 && capped > 0 && cut > 0;
  return {pass, fmt::format("1000 points ({} capped, {} cut off), worst abs error {:.3e} (tol 1e-12)", capped,
                            cut, worst)};
}

Outcome partition_invariants() {
  RngStream root(61);
  std::size_t failures = 0;
  for (int run = 0; run < 100; ++run) {
    RngStream r = root.derive("run", static_cast<std::uint64_t>(run));
    // Every label is cut into the same number of blocks; N = C * k / 2.
    std::size_t classes = 0;
    std::size_t blocks_per_label = 0;
    do {
      classes = 2 + r.engine()() % 9;
      blocks_per_label = 1 + r.engine()() % 8;
    } while ((classes * blocks_per_label) % 2 != 0);
    const std::size_t clients = classes * blocks_per_label / 2;
    const std::size_t per_class = blocks_per_label * (1 + r.engine()() % 20) + r.engine()() % 13;
    Shard data = synth_classes(classes, per_class, 3, 1.0, r.derive("data"));
    const PartitionPlan plan = shard_two_class(data, clients, 2, r.derive("plan"));

    std::vector<int> owner(data.size(), -1);
    bool ok = plan.num_clients() == clients;
    std::size_t lo = data.size();
    std::size_t hi = 0;
    for (std::size_t c = 0; c < plan.num_clients(); ++c) {
      std::set<int> labels;
      for (std::size_t row : plan.assignments[c]) {
        ok = ok && row < data.size() && owner[row] == -1;
        if (row < data.size()) owner[row] = static_cast<int>(c);
        labels.insert(data.labels[row]);
      }
      ok = ok && labels.size() == 2;
      lo = std::min(lo, plan.assignments[c].size());
      hi = std::max(hi, plan.assignments[c].size());
    }
    ok = ok && std::all_of(owner.begin(), owner.end(), [](int o) { return o >= 0; });
    ok = ok && hi - lo <= 2;
    if (!ok) ++failures;
  }
  return {failures == 0, fmt::format("100 randomized runs, {} violations", failures)};
}

Outcome determinism() {
  const fs::path dir = scratch_dir("determinism");
  bool same = true;
  for (const char* strategy : {"fedar", "scaffold", "fedavg_s"}) {
    ExperimentConfig c;
    c.strategy = strategy;
    c.num_clients = 20;
    c.rounds = 30;
    c.seed = 71;
    c.workers = 2;
    if (run_command(c, dir / strategy / "a") != kExitOk || run_command(c, dir / strategy / "b") != kExitOk) {
      same = false;
      continue;
    }
    same = same && slurp(dir / strategy / "a" / "rounds.csv") == slurp(dir / strategy / "b" / "rounds.csv");
  }
  fs::remove_all(dir);
  return {same, "rounds.csv byte-identical across repeated runs for fedar, scaffold, fedavg_s"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"reduction equivalence", 10, reduction_equivalence},
      {"mifa equivalence", 30, mifa_equivalence},
      {"gradient correctness", 10, gradient_correctness},
      {"convex convergence trend", 300, convex_trend},
      {"comparative ordering", 600, comparative_ordering},
      {"bias direction", 600, bias_direction},
      {"shapley axioms", 30, shapley_axioms},
      {"staleness trend", 300, staleness_trend},
      {"weight function", 0, weight_function},
      {"partition invariants", 0, partition_invariants},
      {"determinism", 0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.budget_seconds <= 0 || secs < c.budget_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::string budget = c.budget_seconds > 0 ? fmt::format(" / {:.0f}s", c.budget_seconds) : "";
    fmt::print("{} {}: {} [{:.2f}s{}]\n", pass ? "PASS" : "FAIL", c.name, o.detail, secs, budget);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
