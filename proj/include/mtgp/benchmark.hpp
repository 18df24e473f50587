#pragma once

#include "mtgp/common.hpp"
#include "mtgp/forrester.hpp"
#include "mtgp/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace mtgp::bench {

struct BenchmarkScenario {
  ForresterParams primary_params{1.0, 0.0};
  ForresterParams auxiliary_params{1.0, 0.0};
  Index n_primary = 5;
  Index n_auxiliary = 5;
  Index n_test = 100;
  double observation_noise = 0.0; // standard deviation
  std::uint64_t seed = 0;

  void validate() const {
    if (n_primary < 1 || n_auxiliary < 1 || n_test < 1 || observation_noise < 0.0) {
      throw ValidationError("scenario: counts must be >= 1 and noise >= 0");
    }
  }
};

/// How the two competing models are configured for a scenario.
struct ComparisonOptions {
  KernelKind kernel = KernelKind::SquaredExponential;
  MTGPFamily family = MTGPFamily::slfm();
  /// Forces the auxiliary task's coupling to zero (indicator coregionalization).
  bool decouple_auxiliary = false;
  /// Keep test-grid predictions for plotting.
  bool keep_predictions = false;
};

struct ScenarioPredictions {
  Vector x;
  Vector truth;
  PosteriorPrediction gp;
  PosteriorPrediction mtgp;
  Matrix primary_train;   // n×2: x, y
  Matrix auxiliary_train; // n×2: x, y
};

struct ComparisonResult {
  double mtgp_rmse = 0.0;
  double gp_rmse = 0.0;
  double percent_improvement = 0.0;
  Index n_primary = 0;
  Index n_auxiliary = 0;
  std::uint64_t seed = 0;
  double achieved_correlation = 0.0; // filled by the study
  double target_correlation = 0.0;   // filled by the study
  Index replicate = 0;
  std::optional<ScenarioPredictions> predictions;
};

/// Held-out Task-1 inputs: cell midpoints of an n-cell partition of [0, 1].
inline Vector test_inputs(Index n) {
  Vector x(n);
  for (Index i = 0; i < n; ++i) {
    x(i) = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  }
  return x;
}

namespace design {

/// Uniform draws on [0, 1] that avoid the held-out grid exactly.
inline Vector sample_inputs(std::mt19937_64 &rng, Index n, const Vector &held_out) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector x(n);
  for (Index i = 0; i < n; ++i) {
    double v = u(rng);
    while ((held_out.array() == v).any()) {
      v = u(rng);
    }
    x(i) = v;
  }
  return x;
}

inline Vector add_noise(std::mt19937_64 &rng, Vector y, double sd) {
  if (sd > 0.0) {
    std::normal_distribution<double> n(0.0, sd);
    for (Index i = 0; i < y.size(); ++i) {
      y(i) += n(rng);
    }
  }
  return y;
}

} // namespace design

/// Trains a single-task GP on Task 1 alone and an MTGP on both tasks, and
/// scores both on the held-out Task 1 grid.
inline ComparisonResult run_scenario(const BenchmarkScenario &scenario,
                                     TrainConfig train,
                                     const ComparisonOptions &opts = {}) {
  scenario.validate();
  std::mt19937_64 rng(scenario.seed);
  const Vector xt = test_inputs(scenario.n_test);
  const Vector x1 = design::sample_inputs(rng, scenario.n_primary, xt);
  const Vector x2 = design::sample_inputs(rng, scenario.n_auxiliary, xt);
  const Vector y1 = design::add_noise(rng, forrester(x1, scenario.primary_params),
                                      scenario.observation_noise);
  const Vector y2 = design::add_noise(rng, forrester(x2, scenario.auxiliary_params),
                                      scenario.observation_noise);
  const Vector truth = forrester(xt, scenario.primary_params);

  const Matrix x1m = x1;
  const Matrix x2m = x2;
  const Matrix xtm = xt;

  GPTrainOptions gp_opts;
  gp_opts.kernel = opts.kernel;
  const auto gp = train_gp(x1m, y1, train, gp_opts);
  const auto gp_pred = gp_predict(gp.model, xtm);

  MTGPFamily family = opts.family;
  family.kernel = opts.kernel;
  if (opts.decouple_auxiliary) {
    family.decoupled = true;
  }
  const MultiTaskDataset data({TaskData{x1m, y1}, TaskData{x2m, y2}});
  const auto mt = train_mtgp(data, train, family);
  const auto mt_pred = mtgp_predict(mt.model, 0, xtm);

  ComparisonResult out;
  out.gp_rmse = rmse(gp_pred.mean, truth);
  out.mtgp_rmse = rmse(mt_pred.mean, truth);
  out.percent_improvement = percent_improvement(out.gp_rmse, out.mtgp_rmse);
  out.n_primary = scenario.n_primary;
  out.n_auxiliary = scenario.n_auxiliary;
  out.seed = scenario.seed;
  if (opts.keep_predictions) {
    ScenarioPredictions p;
    p.x = xt;
    p.truth = truth;
    p.gp = gp_pred;
    p.mtgp = mt_pred;
    p.primary_train.resize(x1.size(), 2);
    p.primary_train << x1, y1;
    p.auxiliary_train.resize(x2.size(), 2);
    p.auxiliary_train << x2, y2;
    out.predictions = std::move(p);
  }
  return out;
}

struct SizePair {
  Index n_primary = 5;
  Index n_auxiliary = 5;
  friend bool operator==(const SizePair &, const SizePair &) = default;
};

struct StudyConfig {
  std::vector<double> correlations{0.89, 0.53, 0.33};
  std::vector<SizePair> sizes{{5, 5}, {5, 10}, {10, 5}, {10, 10}};
  Index replicates = 5;
  std::uint64_t seed = 2024;
  Index n_test = 100;
  double observation_noise = 0.0;
  TrainConfig train = [] {
    TrainConfig t;
    t.noise_floor = 1e-8;
    return t;
  }();
  ComparisonOptions comparison;
  /// 0 selects MTGP_NUM_THREADS or the hardware concurrency.
  unsigned threads = 0;

  void validate() const {
    if (correlations.empty() || sizes.empty() || replicates < 1 || n_test < 1) {
      throw ValidationError("study: need correlations, sizes and replicates >= 1");
    }
    for (double r : correlations) {
      if (!(r > 0.0 && r <= 1.0)) {
        throw ValidationError("study: target correlations must lie in (0, 1]");
      }
    }
    for (const auto &s : sizes) {
      if (s.n_primary < 1 || s.n_auxiliary < 1) {
        throw ValidationError("study: sample sizes must be >= 1");
      }
    }
    train.validate();
  }
};

struct Summary {
  double mean = 0.0;
  double sd = 0.0;
};

inline Summary summarize(const std::vector<double> &v) {
  Summary s;
  if (v.empty()) {
    return s;
  }
  for (double x : v) {
    s.mean += x;
  }
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) {
      ss += (x - s.mean) * (x - s.mean);
    }
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

struct StudyRow {
  double target_correlation = 0.0;
  double achieved_correlation = 0.0;
  SizePair sizes;
  Index replicates = 0;
  Summary gp_rmse;
  Summary mtgp_rmse;
  Summary improvement;
  /// Fraction of replicates where MTGP RMSE <= GP RMSE.
  double mtgp_win_fraction = 0.0;
};

struct CalibratedTask {
  double target_r = 0.0;
  CalibrationResult calibration;
};

struct StudyResult {
  std::vector<CalibratedTask> calibrations;
  std::vector<ComparisonResult> runs; // sorted by (correlation, size, replicate)
  std::vector<StudyRow> rows;
};

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) {
    return requested;
  }
  if (const char *env = std::getenv("MTGP_NUM_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) {
      return static_cast<unsigned>(n);
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Seed shared by every correlation level for the same (size, replicate),
/// so levels are compared on identical designs.
inline std::uint64_t scenario_seed(std::uint64_t base, std::size_t size_index,
                                   Index replicate) {
  std::seed_seq seq{static_cast<std::uint32_t>(base),
                    static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(size_index),
                    static_cast<std::uint32_t>(replicate)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

inline StudyResult run_study(const StudyConfig &config) {
  config.validate();
  StudyResult result;
  for (double r : config.correlations) {
    result.calibrations.push_back({r, calibrate_auxiliary(r)});
  }

  struct Job {
    std::size_t corr;
    std::size_t size;
    Index rep;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < config.correlations.size(); ++c) {
    for (std::size_t s = 0; s < config.sizes.size(); ++s) {
      for (Index rep = 0; rep < config.replicates; ++rep) {
        jobs.push_back({c, s, rep});
      }
    }
  }

  std::vector<ComparisonResult> runs(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) {
        return;
      }
      const Job &job = jobs[i];
      try {
        BenchmarkScenario sc;
        sc.auxiliary_params = result.calibrations[job.corr].calibration.params;
        sc.n_primary = config.sizes[job.size].n_primary;
        sc.n_auxiliary = config.sizes[job.size].n_auxiliary;
        sc.n_test = config.n_test;
        sc.observation_noise = config.observation_noise;
        sc.seed = scenario_seed(config.seed, job.size, job.rep);
        TrainConfig train = config.train;
        train.seed = sc.seed;
        ComparisonOptions opts = config.comparison;
        opts.keep_predictions = opts.keep_predictions && job.rep == 0;
        ComparisonResult r = run_scenario(sc, train, opts);
        r.target_correlation = config.correlations[job.corr];
        r.achieved_correlation = result.calibrations[job.corr].calibration.achieved_r;
        r.replicate = job.rep;
        runs[i] = std::move(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) {
          failure = std::current_exception();
        }
        next.store(jobs.size());
      }
    }
  };

  const unsigned n_threads =
      std::min<unsigned>(resolve_threads(config.threads),
                         static_cast<unsigned>(std::max<std::size_t>(1, jobs.size())));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) {
      pool.emplace_back(worker);
    }
    for (auto &t : pool) {
      t.join();
    }
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
  result.runs = std::move(runs);

  for (std::size_t c = 0; c < config.correlations.size(); ++c) {
    for (std::size_t s = 0; s < config.sizes.size(); ++s) {
      std::vector<double> gp, mt, imp;
      Index wins = 0;
      for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (jobs[i].corr != c || jobs[i].size != s) {
          continue;
        }
        const auto &r = result.runs[i];
        gp.push_back(r.gp_rmse);
        mt.push_back(r.mtgp_rmse);
        imp.push_back(r.percent_improvement);
        wins += r.mtgp_rmse <= r.gp_rmse ? 1 : 0;
      }
      StudyRow row;
      row.target_correlation = config.correlations[c];
      row.achieved_correlation = result.calibrations[c].calibration.achieved_r;
      row.sizes = config.sizes[s];
      row.replicates = static_cast<Index>(gp.size());
      row.gp_rmse = summarize(gp);
      row.mtgp_rmse = summarize(mt);
      row.improvement = summarize(imp);
      row.mtgp_win_fraction =
          static_cast<double>(wins) / static_cast<double>(gp.size());
      result.rows.push_back(row);
    }
  }
  return result;
}

} // namespace mtgp::bench
