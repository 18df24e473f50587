#include "mtgp/io/config.hpp"
#include "mtgp/io/csv.hpp"
#include "mtgp/io/model_file.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mtgp;
namespace fs = std::filesystem;

namespace {

const std::string kCli = MTGP_CLI_PATH;

class CliTest : public ::testing::Test {
protected:
  void SetUp() override {
    const auto *info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("mtgp_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string &name) const { return (dir_ / name).string(); }

  void write(const std::string &name, const std::string &text) const {
    std::ofstream(path(name)) << text;
  }

  static std::string read(const std::string &p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  /// Runs the CLI with stdout/stderr captured to files; returns the exit code.
  int run(const std::string &args) {
    const std::string cmd = "'" + kCli + "' " + args + " >'" + path("stdout.txt") + "' 2>'" +
                            path("stderr.txt") + "'";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string out() const { return read(path("stdout.txt")); }
  std::string err() const { return read(path("stderr.txt")); }

  /// Two correlated tasks sampled from smooth curves, 2-D inputs.
  void write_two_task_data(const std::string &name) const {
    std::ostringstream csv;
    csv << "x1,x2,task,y\n";
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int d = 0; d < 2; ++d) {
      for (int i = 0; i < (d == 0 ? 7 : 10); ++i) {
        const double a = u(rng);
        const double b = u(rng);
        const double y = std::sin(6 * a) + b * b + (d == 1 ? 0.3 * a : 0.0);
        csv << io::format_real(a) << ',' << io::format_real(b) << ',' << d << ','
            << io::format_real(y) << '\n';
      }
    }
    write(name, csv.str());
  }

  fs::path dir_;
};

const char *kQuickConfig =
    R"({"family":"mtgp-slfm","max_iterations":150,"num_restarts":2,"seed":3})";

} // namespace

TEST_F(CliTest, TrainPredictRoundTripMatchesInProcessPredictions) {
  write_two_task_data("train.csv");
  write("config.json", kQuickConfig);
  ASSERT_EQ(run("train --data " + path("train.csv") + " --config " + path("config.json") +
                " --out " + path("run")),
            0)
      << err();
  ASSERT_TRUE(fs::exists(path("run/model.json")));
  const auto metrics = nlohmann::json::parse(read(path("run/metrics.json")));
  EXPECT_EQ(metrics["num_tasks"], 2);
  EXPECT_EQ(metrics["num_points"], 17);
  EXPECT_TRUE(metrics.contains("wall_time_seconds"));

  write("query.csv", "x1,x2,task\n0.1,0.2,0\n0.5,0.5,1\n0.9,0.3,0\n0.33,0.8,1\n");
  ASSERT_EQ(run("predict --model " + path("run/model.json") + " --data " + path("query.csv") +
                " --out " + path("pred.csv")),
            0)
      << err();

  // The same computation in-process.
  const auto data = io::read_task_data(path("train.csv")).dataset;
  const auto cfg = io::run_config_from_json(nlohmann::json::parse(kQuickConfig));
  const auto trained = train_mtgp(data, cfg.train, cfg.mtgp_family());

  std::istringstream pred_text(read(path("pred.csv")));
  const auto pred = io::parse_csv(pred_text, "pred.csv");
  EXPECT_EQ(pred.header,
            (std::vector<std::string>{"x1", "x2", "task", "mean", "stddev"}));
  ASSERT_EQ(pred.rows.size(), 4u);
  for (std::size_t r = 0; r < pred.rows.size(); ++r) {
    Matrix x(1, 2);
    x << std::stod(pred.rows[r][0]), std::stod(pred.rows[r][1]);
    const auto want = mtgp_predict(trained.model, std::stol(pred.rows[r][2]), x);
    EXPECT_NEAR(std::stod(pred.rows[r][3]), want.mean(0), 1e-10);
    EXPECT_NEAR(std::stod(pred.rows[r][4]), std::sqrt(std::max(want.variance(0), 0.0)), 1e-10);
    EXPECT_GE(std::stod(pred.rows[r][4]), 0.0);
  }
}

TEST_F(CliTest, RepeatedRunsAreByteIdentical) {
  write_two_task_data("train.csv");
  write("config.json", kQuickConfig);
  write("query.csv", "x1,x2,task\n0.1,0.2,0\n0.5,0.5,1\n");
  std::string first_model;
  std::string first_pred;
  std::string first_trace;
  for (int k = 0; k < 2; ++k) {
    ASSERT_EQ(run("train --data " + path("train.csv") + " --config " + path("config.json") +
                  " --out " + path("run") + " --trace " + path("trace.jsonl")),
              0)
        << err();
    ASSERT_EQ(run("predict --model " + path("run/model.json") + " --data " + path("query.csv")),
              0);
    if (k == 0) {
      first_model = read(path("run/model.json"));
      first_pred = out();
      first_trace = read(path("trace.jsonl"));
    } else {
      EXPECT_EQ(read(path("run/model.json")), first_model);
      EXPECT_EQ(out(), first_pred);
      EXPECT_EQ(read(path("trace.jsonl")), first_trace);
    }
  }
  EXPECT_FALSE(first_trace.empty());
  const auto line = nlohmann::json::parse(first_trace.substr(0, first_trace.find('\n')));
  EXPECT_TRUE(line.contains("objective"));
  EXPECT_TRUE(line.contains("gradient_norm"));
}

TEST_F(CliTest, SingleTaskModelInterpolatesNearNoiselessData) {
  std::ostringstream csv;
  csv << "x1,y\n";
  for (int i = 0; i < 12; ++i) {
    const double x = i / 11.0;
    csv << io::format_real(x) << ',' << io::format_real(std::sin(5 * x)) << '\n';
  }
  write("train.csv", csv.str());
  write("config.json", R"({"family":"gp","seed":1})");
  ASSERT_EQ(run("train --data " + path("train.csv") + " --config " + path("config.json") +
                " --out " + path("run")),
            0)
      << err();
  ASSERT_EQ(run("predict --model " + path("run/model.json") + " --data " + path("train.csv")),
            0)
      << err();
  std::istringstream text(out());
  const auto pred = io::parse_csv(text, "stdout");
  ASSERT_EQ(pred.rows.size(), 12u);
  for (const auto &row : pred.rows) {
    EXPECT_NEAR(std::stod(row[2]), std::stod(row[1]), 1e-3);
    EXPECT_GE(std::stod(row[3]), 0.0);
  }
}

TEST_F(CliTest, EmptyQueryGivesHeaderOnly) {
  write_two_task_data("train.csv");
  write("config.json", kQuickConfig);
  ASSERT_EQ(run("train --data " + path("train.csv") + " --config " + path("config.json") +
                " --out " + path("run")),
            0);
  write("query.csv", "x1,x2,task\n");
  ASSERT_EQ(run("predict --model " + path("run/model.json") + " --data " + path("query.csv")),
            0)
      << err();
  EXPECT_EQ(out(), "x1,x2,task,mean,stddev\n");
}

TEST_F(CliTest, ValidationFailuresExitTwo) {
  write("config.json", kQuickConfig);
  write("gap.csv", "x1,task,y\n0.1,0,1\n0.2,2,3\n");
  EXPECT_EQ(run("train --data " + path("gap.csv") + " --config " + path("config.json") +
                " --out " + path("run")),
            2);
  EXPECT_NE(err().find("task 1 is missing"), std::string::npos) << err();

  write_two_task_data("train.csv");
  write("unknown.json", R"({"family":"mtgp-slfm","learnig_rate":0.1})");
  EXPECT_EQ(run("train --data " + path("train.csv") + " --config " + path("unknown.json")), 2);
  EXPECT_NE(err().find("learnig_rate"), std::string::npos) << err();

  write("gp.json", R"({"family":"gp"})");
  EXPECT_EQ(run("train --data " + path("train.csv") + " --config " + path("gp.json")), 2);

  write("bad_row.csv", "x1,y\n0.1,1\n0.2\n");
  EXPECT_EQ(run("train --data " + path("bad_row.csv") + " --config " + path("config.json")), 2);
  EXPECT_NE(err().find(":3"), std::string::npos) << err();

  ASSERT_EQ(run("train --data " + path("train.csv") + " --config " + path("config.json") +
                " --out " + path("run")),
            0);
  write("query1d.csv", "x1,task\n0.5,0\n");
  EXPECT_EQ(run("predict --model " + path("run/model.json") + " --data " + path("query1d.csv")),
            2);
  write("query_task.csv", "x1,x2,task\n0.5,0.5,5\n");
  EXPECT_EQ(
      run("predict --model " + path("run/model.json") + " --data " + path("query_task.csv")), 2);

  std::string model = read(path("run/model.json"));
  model.replace(model.find("\"schema_version\": 1"), 19, "\"schema_version\": 7");
  write("future.json", model);
  EXPECT_EQ(run("predict --model " + path("future.json") + " --data " + path("query_task.csv")),
            2);

  EXPECT_EQ(run("train --config " + path("config.json")), 2); // missing --data
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(CliTest, CheckPassesAndDetectsInjectedFault) {
  EXPECT_EQ(run("check --seed 3"), 0) << out();
  const std::string report = out();
  for (const char *name : {"gradient-gp", "gradient-mtgp", "conditioning-gp", "kronecker",
                           "block-diagonal"}) {
    EXPECT_NE(report.find(name), std::string::npos) << name;
  }
  EXPECT_EQ(run("check --seed 3"), 0);
  EXPECT_EQ(out(), report);
  EXPECT_EQ(run("check --inject-fault gradient-gp"), 1);
  EXPECT_NE(out().find("FAIL"), std::string::npos) << out();
  EXPECT_EQ(run("check --inject-fault no-such-check"), 2);
}

TEST_F(CliTest, BenchmarkSingleCell) {
  EXPECT_EQ(run("benchmark --correlations 0.89 --sizes 5,5 --replicates 3 --out " +
                path("bench")),
            0)
      << err();
  const auto summary = nlohmann::json::parse(read(path("bench/summary.json")));
  ASSERT_EQ(summary["rows"].size(), 1u);
  EXPECT_EQ(summary["rows"][0]["replicates"], 3);
  EXPECT_NEAR(summary["calibrations"][0]["achieved_correlation"].get<double>(), 0.89, 0.03);
  std::istringstream runs(read(path("bench/runs.csv")));
  EXPECT_EQ(io::parse_csv(runs, "runs.csv").rows.size(), 3u);
  EXPECT_TRUE(fs::exists(path("bench/table.txt")));
  EXPECT_TRUE(fs::exists(path("bench/curves.csv")));
  EXPECT_TRUE(fs::exists(path("bench/predictions_r0.89_n5-5.csv")));
  EXPECT_TRUE(fs::exists(path("bench/training_r0.89_n5-5.csv")));
  EXPECT_NE(out().find("% Improvement"), std::string::npos) << out();

  EXPECT_EQ(run("benchmark --sizes 5x5 --out " + path("bad")), 2);
}
