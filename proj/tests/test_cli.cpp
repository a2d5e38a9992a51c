#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "fedar/analysis.hpp"
#include "fedar/commands.hpp"
#include "fedar/config.hpp"
#include "fedar/csv.hpp"
#include "fedar/errors.hpp"

namespace fedar {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / fmt::format("fedar-test-{:016x}", (std::uint64_t{rd()} << 32) | rd());
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json small_doc() {
  return json{{"rounds", 5},
              {"num_clients", 4},
              {"batch_size", 16},
              {"seed", 11},
              {"dataset",
               {{"kind", "synthetic"}, {"num_classes", 4}, {"per_class", 40}, {"input_dim", 5}}}};
}

int run_cli(const std::string& args) {
  const std::string cmd = fmt::format("\"{}\" -q {} >/dev/null 2>&1", FEDAR_CLI_PATH, args);
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(ConfigJson, DefaultsApply) {
  const ExperimentConfig c = config_from_json(json{{"rounds", 10}, {"dataset", {{"kind", "synthetic"}}}});
  EXPECT_EQ(c.local_steps, 5u);
  EXPECT_EQ(c.batch_size, 64u);
  EXPECT_EQ(c.eta0, 0.1);
  EXPECT_EQ(c.rho, 0.1);
  EXPECT_EQ(c.psi_max, 2.0);
  EXPECT_EQ(c.strategy, "fedar");
}

TEST(ConfigJson, RejectsBadValuesWithPath) {
  json doc = small_doc();
  doc["rho"] = 1.5;
  try {
    config_from_json(doc);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("config.rho"), std::string::npos) << e.what();
  }
  doc = small_doc();
  doc["rhoo"] = 0.2;
  EXPECT_THROW(config_from_json(doc), ConfigError);
  doc = small_doc();
  doc["rounds"] = "five";
  EXPECT_THROW(config_from_json(doc), ConfigError);
  doc = small_doc();
  doc.erase("rounds");
  EXPECT_THROW(config_from_json(doc), ConfigError);
  doc = small_doc();
  doc["dataset"]["kind"] = "imagenet";
  EXPECT_THROW(config_from_json(doc), ConfigError);
}

TEST(ConfigJson, RoundTripIsIdempotent) {
  json doc = small_doc();
  doc["strategy"] = "fedvarp";
  doc["lr_schedule"] = "inverse_sqrt_t";
  doc["cutoff"] = {{"kind", "nonconvex"}, {"c", 3.0}, {"t0", 4.0}};
  doc["availability"] = {{"kind", "stale"}, {"client", 2}, {"stale_rounds", 3}};
  const ExperimentConfig c = config_from_json(doc);
  const json once = config_to_json(c);
  const json twice = config_to_json(config_from_json(once));
  EXPECT_EQ(once, twice);
  EXPECT_EQ(once["strategy"], "fedvarp");
}

TEST(ConfigJson, MissingFileIsIoError) {
  EXPECT_THROW(parse_config("/nonexistent/fedar.json"), IoError);
  TempDir tmp;
  std::ofstream(tmp.path() / "bad.json") << "{ not json";
  EXPECT_THROW(parse_config(tmp.path() / "bad.json"), ConfigError);
}

TEST(SweepJson, ParsesAxisAndAppliesValues) {
  const json doc{{"base", small_doc()},
                 {"axis", {{"name", "p_min"}, {"values", {0.1, 0.5}}}},
                 {"strategies", {"fedar", "fedavg"}},
                 {"seeds", {1, 2}}};
  const SweepSpec s = sweep_from_json(doc);
  EXPECT_EQ(s.axis, SweepAxis::kPMin);
  EXPECT_EQ(s.values.size(), 2u);
  EXPECT_EQ(apply_axis(s.base, SweepAxis::kRho, 0.5).rho, 0.5);
  EXPECT_THROW(apply_axis(s.base, SweepAxis::kRho, 2.0), ConfigError);
  EXPECT_THROW(apply_axis(s.base, SweepAxis::kPMin, 0.0), ConfigError);
}

TEST(Csv, EscapesAndReadsBack) {
  EXPECT_EQ(csv_escape("plain"), "plain");
  EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");
  TempDir tmp;
  {
    CsvWriter w(tmp.path() / "t.csv", {"name", "value"});
    w.row({"x,y", format_double(0.1)});
    w.row({"line\nbreak", format_double(-1e-300)});
    EXPECT_THROW(w.row({"only one"}), FormatError);
    w.close();
  }
  const CsvTable t = read_csv(tmp.path() / "t.csv");
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][0], "x,y");
  EXPECT_EQ(t.rows[1][0], "line\nbreak");
  EXPECT_EQ(std::stod(t.rows[0][1]), 0.1);
  EXPECT_EQ(std::stod(t.rows[1][1]), -1e-300);
  EXPECT_EQ(slurp(tmp.path() / "t.csv").find('\r'), std::string::npos);
}

TEST(Csv, DoublesRoundTripExactly) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(gen) * std::pow(10.0, static_cast<double>(i % 40) - 20.0);
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
}

TEST(Artifacts, RunWritesEveryFile) {
  TempDir tmp;
  json doc = small_doc();
  doc["rounds"] = 7;
  doc["eval_every"] = 3;
  const ExperimentConfig c = config_from_json(doc);
  ASSERT_EQ(run_command(c, tmp.path()), kExitOk);
  for (const char* name : {"rounds.csv", "timing.csv", "per_client.csv", "bias.csv", "final_model.bin",
                           "config.echo.json", "meta.json"}) {
    EXPECT_TRUE(fs::exists(tmp.path() / name)) << name;
  }
  const CsvTable rounds = read_csv(tmp.path() / "rounds.csv");
  EXPECT_EQ(rounds.rows.size(), 3u);  // ceil(7 / 3)
  const std::vector<std::string> header{"round", "train_loss", "test_accuracy", "n_t", "num_participating",
                                        "participating"};
  EXPECT_EQ(rounds.header, header);
  EXPECT_EQ(rounds.rows.back()[0], "7");

  const CsvTable per_client = read_csv(tmp.path() / "per_client.csv");
  EXPECT_EQ(per_client.rows.size(), 4u);

  const json echo = json::parse(slurp(tmp.path() / "config.echo.json"));
  EXPECT_EQ(echo, config_to_json(c));
  const json meta = json::parse(slurp(tmp.path() / "meta.json"));
  EXPECT_EQ(meta["seed"], 11);
  EXPECT_TRUE(meta.contains("version"));
  EXPECT_TRUE(meta.contains("git_hash"));
}

TEST(Artifacts, RepeatedRunsAreByteIdentical) {
  TempDir a;
  TempDir b;
  const ExperimentConfig c = config_from_json(small_doc());
  ASSERT_EQ(run_command(c, a.path()), kExitOk);
  ASSERT_EQ(run_command(c, b.path()), kExitOk);
  for (const char* name : {"rounds.csv", "per_client.csv", "bias.csv", "final_model.bin", "config.echo.json"}) {
    EXPECT_EQ(slurp(a.path() / name), slurp(b.path() / name)) << name;
  }
}

TEST(Artifacts, ModelBinaryRoundTrip) {
  TempDir tmp;
  ParamVector w(5);
  w << 0.1, -2.5, 1e-300, 3.0, -0.0;
  write_model(w, tmp.path() / "m.bin");
  EXPECT_EQ(fs::file_size(tmp.path() / "m.bin"), 8u + 5u * 8u);
  const ParamVector r = read_model(tmp.path() / "m.bin");
  ASSERT_EQ(r.size(), 5);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(r[i], w[i]);
  const std::string bytes = slurp(tmp.path() / "m.bin");
  EXPECT_EQ(static_cast<unsigned char>(bytes[0]), 5u);
}

TEST(Artifacts, ReadModelRejectsTruncation) {
  TempDir tmp;
  std::ofstream(tmp.path() / "short.bin", std::ios::binary) << "abc";
  EXPECT_THROW(read_model(tmp.path() / "short.bin"), FormatError);
}

TEST(Cli, ExitCodes) {
  TempDir tmp;
  std::ofstream(tmp.path() / "good.json") << small_doc().dump();
  json bad = small_doc();
  bad["rho"] = 1.5;
  std::ofstream(tmp.path() / "bad.json") << bad.dump();
  std::ofstream(tmp.path() / "blocker") << "a regular file";

  EXPECT_EQ(run_cli(fmt::format("run -c {} -o {}", (tmp.path() / "good.json").string(),
                                (tmp.path() / "out").string())),
            kExitOk);
  EXPECT_EQ(run_cli(fmt::format("run -c {} -o {}", (tmp.path() / "bad.json").string(),
                                (tmp.path() / "out2").string())),
            kExitConfig);
  EXPECT_EQ(run_cli(fmt::format("run -c {} -o {}", (tmp.path() / "good.json").string(),
                                (tmp.path() / "blocker" / "sub").string())),
            kExitIo);
  EXPECT_EQ(run_cli(fmt::format("run -c {} -o {}", (tmp.path() / "missing.json").string(),
                                (tmp.path() / "out3").string())),
            kExitIo);
  EXPECT_FALSE(fs::exists(tmp.path() / "out2" / "rounds.csv"));
}

TEST(Cli, MetaJsonReproducesTheRun) {
  TempDir tmp;
  std::ofstream(tmp.path() / "good.json") << small_doc().dump();
  ASSERT_EQ(run_cli(fmt::format("run -c {} -o {} --seed 99 --strategy mifa",
                                (tmp.path() / "good.json").string(), (tmp.path() / "a").string())),
            kExitOk);
  ASSERT_EQ(run_cli(fmt::format("run -c {} -o {}", (tmp.path() / "a" / "meta.json").string(),
                                (tmp.path() / "b").string())),
            kExitOk);
  EXPECT_EQ(slurp(tmp.path() / "a" / "rounds.csv"), slurp(tmp.path() / "b" / "rounds.csv"));
  const json meta = json::parse(slurp(tmp.path() / "b" / "meta.json"));
  EXPECT_EQ(meta["seed"], 99);
  EXPECT_EQ(meta["strategy"], "mifa");
}

TEST(Cli, ReportProducesTables) {
  TempDir tmp;
  const json spec{{"base", small_doc()},
                  {"axis", {{"name", "rho"}, {"values", {0.2}}}},
                  {"strategies", {"fedar", "fedavg"}},
                  {"seeds", {1, 2}}};
  std::ofstream(tmp.path() / "sweep.json") << spec.dump();
  ASSERT_EQ(run_cli(fmt::format("sweep -c {} -o {}", (tmp.path() / "sweep.json").string(),
                                (tmp.path() / "s").string())),
            kExitOk);
  ASSERT_EQ(run_cli(fmt::format("report -i {} -o {}", (tmp.path() / "s").string(),
                                (tmp.path() / "r").string())),
            kExitOk);
  const CsvTable stats = read_csv(tmp.path() / "r" / "rho=0.2" / "stats.csv");
  EXPECT_EQ(stats.rows.size(), 2u);
  const CsvTable ttest = read_csv(tmp.path() / "r" / "rho=0.2" / "ttest.csv");
  ASSERT_EQ(ttest.rows.size(), 1u);
  EXPECT_EQ(ttest.rows[0][0], "fedar");
}

TEST(Sweep, GridAndSummaryMatchARecompute) {
  TempDir tmp;
  SweepSpec s;
  s.base = config_from_json(small_doc());
  s.axis = SweepAxis::kPMin;
  s.values = {0.2, 0.6};
  s.strategies = {"fedar", "fedavg", "mifa"};
  s.seeds = {1, 2};
  ASSERT_EQ(sweep_command(s, tmp.path()), kExitOk);

  std::size_t dirs = 0;
  for (const auto& e : fs::recursive_directory_iterator(tmp.path())) {
    if (e.is_directory() && e.path().filename().string().rfind("seed=", 0) == 0) ++dirs;
  }
  EXPECT_EQ(dirs, 12u);

  const CsvTable summary = read_csv(tmp.path() / "sweep_summary.csv");
  ASSERT_EQ(summary.rows.size(), 6u);
  const std::size_t loss_col = summary.column("final_train_loss");
  const std::size_t var_col = summary.column("client_accuracy_var");
  for (const auto& row : summary.rows) {
    double loss = 0.0;
    double var = 0.0;
    for (std::uint64_t seed : s.seeds) {
      ExperimentConfig c = apply_axis(s.base, s.axis, std::stod(row[1]));
      c.strategy = row[2];
      c.seed = seed;
      const ExperimentResult r = run_experiment(c);
      loss += r.rounds.back().train_loss;
      var += accuracy_stats(r.client_accuracy).variance;
    }
    EXPECT_NEAR(std::stod(row[loss_col]), loss / 2.0, 1e-12) << row[1] << " " << row[2];
    EXPECT_NEAR(std::stod(row[var_col]), var / 2.0, 1e-12);
  }
}

TEST(Sweep, SingleCellEqualsRun) {
  TempDir tmp;
  SweepSpec s;
  s.base = config_from_json(small_doc());
  s.axis = SweepAxis::kNumClients;
  s.values = {4};
  s.strategies = {"fedar"};
  s.seeds = {11};
  ASSERT_EQ(sweep_command(s, tmp.path() / "sweep"), kExitOk);
  ASSERT_EQ(run_command(s.base, tmp.path() / "run"), kExitOk);
  EXPECT_EQ(slurp(tmp.path() / "sweep" / "num_clients=4" / "fedar" / "seed=11" / "rounds.csv"),
            slurp(tmp.path() / "run" / "rounds.csv"));
}

TEST(Sweep, FailedCellsGivePartialExit) {
  TempDir tmp;
  SweepSpec s;
  s.base = config_from_json(small_doc());
  s.axis = SweepAxis::kNumClients;
  s.values = {4, 500};  // 500 clients cannot be carved from 160 samples
  s.strategies = {"fedavg"};
  s.seeds = {1};
  EXPECT_EQ(sweep_command(s, tmp.path()), kExitPartial);
  const CsvTable summary = read_csv(tmp.path() / "sweep_summary.csv");
  ASSERT_EQ(summary.rows.size(), 2u);
  EXPECT_EQ(summary.rows[1][summary.column("failed")], "1");
}

TEST(Shapley, CommandWritesTables) {
  TempDir tmp;
  json doc = small_doc();
  doc["p_min"] = 1.0;
  const ExperimentConfig c = config_from_json(doc);
  ASSERT_EQ(shapley_command(c, {0, 2}, {1, 2}, tmp.path()), kExitOk);
  const CsvTable means = read_csv(tmp.path() / "shapley.csv");
  const CsvTable runs = read_csv(tmp.path() / "shapley_runs.csv");
  EXPECT_EQ(means.rows.size(), 2u * 4u);
  EXPECT_EQ(runs.rows.size(), 2u * 2u * 4u);
  const std::size_t phi = runs.column("phi");
  const double expected = 0.5 * (std::stod(runs.rows[0][phi]) + std::stod(runs.rows[8][phi]));
  EXPECT_NEAR(std::stod(means.rows[0][means.column("phi")]), expected, 1e-15);
}

}  // namespace
}  // namespace fedar
