#include "mtgp/benchmark.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

using namespace mtgp;
using namespace mtgp::bench;

namespace {

TrainConfig light() {
  TrainConfig t;
  t.noise_floor = 1e-8;
  t.max_iterations = 300;
  t.num_restarts = 2;
  return t;
}

} // namespace

TEST(TestInputs, CellMidpoints) {
  const Vector x = test_inputs(4);
  ASSERT_EQ(x.size(), 4);
  EXPECT_EQ(x(0), 0.125);
  EXPECT_EQ(x(1), 0.375);
  EXPECT_EQ(x(2), 0.625);
  EXPECT_EQ(x(3), 0.875);
  const Vector y = test_inputs(100);
  EXPECT_GT(y.minCoeff(), 0.0);
  EXPECT_LT(y.maxCoeff(), 1.0);
}

TEST(Design, TrainingInputsAvoidTheHeldOutGrid) {
  std::mt19937_64 rng(1);
  const Vector held = test_inputs(100);
  const Vector x = design::sample_inputs(rng, 500, held);
  for (Index i = 0; i < x.size(); ++i) {
    EXPECT_GE(x(i), 0.0);
    EXPECT_LT(x(i), 1.0);
    EXPECT_FALSE((held.array() == x(i)).any());
  }
}

TEST(Scenario, DeterministicForFixedSeeds) {
  BenchmarkScenario sc;
  sc.auxiliary_params = {0.5, 10.0};
  sc.seed = 77;
  TrainConfig t = light();
  t.seed = 3;
  const auto a = run_scenario(sc, t);
  const auto b = run_scenario(sc, t);
  EXPECT_EQ(a.gp_rmse, b.gp_rmse);
  EXPECT_EQ(a.mtgp_rmse, b.mtgp_rmse);
  EXPECT_EQ(a.percent_improvement, percent_improvement(a.gp_rmse, a.mtgp_rmse));
}

TEST(Scenario, KeepsPredictionsOnRequest) {
  BenchmarkScenario sc;
  sc.n_test = 20;
  sc.seed = 5;
  ComparisonOptions o;
  o.keep_predictions = true;
  const auto r = run_scenario(sc, light(), o);
  ASSERT_TRUE(r.predictions.has_value());
  const auto &p = *r.predictions;
  EXPECT_EQ(p.x, test_inputs(20));
  EXPECT_EQ(p.primary_train.rows(), sc.n_primary);
  EXPECT_EQ(p.auxiliary_train.rows(), sc.n_auxiliary);
  EXPECT_NEAR(rmse(p.gp.mean, p.truth), r.gp_rmse, 1e-15);
  EXPECT_NEAR(rmse(p.mtgp.mean, p.truth), r.mtgp_rmse, 1e-15);
  for (Index i = 0; i < p.truth.size(); ++i) {
    EXPECT_NEAR(p.truth(i), oracle::forrester(p.x(i), 1.0, 0.0), 1e-12);
  }
  EXPECT_FALSE(run_scenario(sc, light()).predictions.has_value());
}

TEST(Scenario, IdenticalAuxiliaryTaskHelps) {
  BenchmarkScenario sc;
  sc.n_primary = 5;
  sc.n_auxiliary = 20;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    sc.seed = seed;
    TrainConfig t;
    t.noise_floor = 1e-8;
    t.seed = seed;
    const auto r = run_scenario(sc, t);
    EXPECT_GT(r.percent_improvement, 0.0)
        << "seed " << seed << ": gp " << r.gp_rmse << ", mtgp " << r.mtgp_rmse;
  }
}

TEST(Scenario, DecoupledAuxiliaryTaskIsInert) {
  BenchmarkScenario sc;
  sc.auxiliary_params = calibrate_auxiliary(0.89).params;
  ComparisonOptions o;
  o.decouple_auxiliary = true;
  double total = 0.0;
  const int seeds = 10;
  for (int s = 0; s < seeds; ++s) {
    sc.seed = static_cast<std::uint64_t>(100 + s);
    TrainConfig t;
    t.noise_floor = 1e-8;
    t.seed = sc.seed;
    const auto r = run_scenario(sc, t, o);
    total += std::abs(r.mtgp_rmse - r.gp_rmse) / r.gp_rmse;
  }
  EXPECT_LT(total / seeds, 0.05);
}

TEST(Scenario, RejectsInvalidScenario) {
  BenchmarkScenario sc;
  sc.n_primary = 0;
  EXPECT_THROW(run_scenario(sc, light()), ValidationError);
  sc = BenchmarkScenario{};
  sc.observation_noise = -1.0;
  EXPECT_THROW(run_scenario(sc, light()), ValidationError);
}

TEST(Summarize, MeanAndSampleStandardDeviation) {
  const auto s = summarize({1.0, 2.0, 4.0});
  EXPECT_NEAR(s.mean, 7.0 / 3.0, 1e-15);
  EXPECT_NEAR(s.sd, std::sqrt(((1 - 7.0 / 3) * (1 - 7.0 / 3) + (2 - 7.0 / 3) * (2 - 7.0 / 3) +
                               (4 - 7.0 / 3) * (4 - 7.0 / 3)) /
                              2.0),
              1e-15);
  EXPECT_EQ(summarize({3.5}).sd, 0.0);
  EXPECT_EQ(summarize({}).mean, 0.0);
}

TEST(ScenarioSeed, SharedAcrossCorrelationsDistinctAcrossCells) {
  EXPECT_EQ(scenario_seed(2024, 1, 2), scenario_seed(2024, 1, 2));
  EXPECT_NE(scenario_seed(2024, 1, 2), scenario_seed(2024, 2, 1));
  EXPECT_NE(scenario_seed(2024, 0, 0), scenario_seed(2025, 0, 0));
}

TEST(Study, DefaultGridGivesTwelveRows) {
  StudyConfig c;
  c.replicates = 1;
  c.n_test = 20;
  c.train = light();
  c.threads = 1;
  const auto r = run_study(c);
  ASSERT_EQ(r.rows.size(), 12u);
  EXPECT_EQ(r.runs.size(), 12u);
  ASSERT_EQ(r.calibrations.size(), 3u);
  for (const auto &row : r.rows) {
    EXPECT_EQ(row.replicates, 1);
    EXPECT_EQ(row.gp_rmse.sd, 0.0);
    EXPECT_EQ(row.mtgp_rmse.sd, 0.0);
    EXPECT_EQ(row.improvement.sd, 0.0);
  }
  // Row order: correlation-major, then size.
  EXPECT_EQ(r.rows[0].target_correlation, 0.89);
  EXPECT_EQ(r.rows[4].target_correlation, 0.53);
  EXPECT_EQ(r.rows[5].sizes, (SizePair{5, 10}));
  // Every correlation level sees the same single-task baseline for a size.
  for (std::size_t s = 0; s < 4; ++s) {
    EXPECT_EQ(r.rows[s].gp_rmse.mean, r.rows[4 + s].gp_rmse.mean);
    EXPECT_EQ(r.rows[s].gp_rmse.mean, r.rows[8 + s].gp_rmse.mean);
  }
}

TEST(Study, ResultsIndependentOfThreadCount) {
  StudyConfig c;
  c.correlations = {0.89};
  c.sizes = {{5, 5}, {5, 10}};
  c.replicates = 2;
  c.n_test = 20;
  c.train = light();
  c.threads = 1;
  const auto a = run_study(c);
  c.threads = 3;
  const auto b = run_study(c);
  ASSERT_EQ(a.runs.size(), b.runs.size());
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    EXPECT_EQ(a.runs[i].gp_rmse, b.runs[i].gp_rmse);
    EXPECT_EQ(a.runs[i].mtgp_rmse, b.runs[i].mtgp_rmse);
    EXPECT_EQ(a.runs[i].replicate, b.runs[i].replicate);
  }
  // Win fraction counts replicates where the multi-task model is no worse.
  for (const auto &row : a.rows) {
    EXPECT_GE(row.mtgp_win_fraction, 0.0);
    EXPECT_LE(row.mtgp_win_fraction, 1.0);
  }
}

TEST(Study, Validation) {
  StudyConfig c;
  c.replicates = 0;
  EXPECT_THROW(run_study(c), ValidationError);
  c = StudyConfig{};
  c.correlations = {0.0};
  EXPECT_THROW(run_study(c), ValidationError);
  c = StudyConfig{};
  c.sizes = {{0, 5}};
  EXPECT_THROW(run_study(c), ValidationError);
  c = StudyConfig{};
  c.correlations.clear();
  EXPECT_THROW(run_study(c), ValidationError);
}

TEST(Threads, ExplicitRequestWinsOverEnvironment) {
  ::setenv("MTGP_NUM_THREADS", "3", 1);
  EXPECT_EQ(resolve_threads(0), 3u);
  EXPECT_EQ(resolve_threads(2), 2u);
  ::setenv("MTGP_NUM_THREADS", "bogus", 1);
  EXPECT_GE(resolve_threads(0), 1u);
  ::unsetenv("MTGP_NUM_THREADS");
}
