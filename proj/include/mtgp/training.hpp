#pragma once

#include "mtgp/common.hpp"
#include "mtgp/dataset.hpp"
#include "mtgp/gp.hpp"
#include "mtgp/multitask.hpp"
#include "mtgp/optim.hpp"
#include "mtgp/parameters.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace mtgp {

struct TrainConfig {
  double learning_rate = 0.05;
  Index max_iterations = 2000;
  double convergence_tolerance = 1e-7;
  Index convergence_window = 20;
  Index num_restarts = 4;
  std::uint64_t seed = 0;
  /// Lower bound enforced on learned noise variances.
  double noise_floor = kNoiseFloor;

  void validate() const {
    if (!(learning_rate > 0.0) || max_iterations < 0 ||
        !(convergence_tolerance > 0.0) || convergence_window < 1 ||
        num_restarts < 1 || !(noise_floor > 0.0)) {
      throw ValidationError("train config: rates, tolerances and counts must be positive");
    }
  }

  AdamOptions adam() const {
    AdamOptions a;
    a.learning_rate = learning_rate;
    a.max_iterations = max_iterations;
    a.tolerance = convergence_tolerance;
    a.window = convergence_window;
    return a;
  }
};

struct RestartReport {
  Index restart = 0;
  bool ok = false;
  double initial_value = -std::numeric_limits<double>::infinity();
  double final_value = -std::numeric_limits<double>::infinity();
  Index iterations = 0;
  std::string message;
};

namespace detail {

inline std::mt19937_64 restart_rng(std::uint64_t seed, Index restart) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(restart), 0x6d74u};
  return std::mt19937_64(seq);
}

inline double median(std::vector<double> v) {
  if (v.empty()) {
    return 0.0;
  }
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) {
    return *mid;
  }
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

/// log of the median pairwise distance along each input dimension; zero
/// (lengthscale 1) when undefined.
inline Vector initial_log_lengthscales(const Matrix &x) {
  Vector out = Vector::Zero(x.cols());
  for (Index p = 0; p < x.cols(); ++p) {
    std::vector<double> dists;
    for (Index i = 0; i < x.rows(); ++i) {
      for (Index j = i + 1; j < x.rows(); ++j) {
        dists.push_back(std::abs(x(i, p) - x(j, p)));
      }
    }
    const double med = median(std::move(dists));
    out(p) = med > 0.0 ? std::log(med) : 0.0;
  }
  return out;
}

inline double sample_variance_or(const Vector &y, double fallback) {
  if (y.size() < 2) {
    return fallback;
  }
  const double var =
      (y.array() - y.mean()).square().sum() / static_cast<double>(y.size() - 1);
  return var > 0.0 ? var : fallback;
}

/// Restart 0 starts from the heuristic lengthscales; later restarts jitter
/// them in log space.
inline void perturb_lengthscales(Vector &log_ls, Index restart,
                                 std::mt19937_64 &rng) {
  if (restart == 0) {
    return;
  }
  std::normal_distribution<double> n01(0.0, 1.0);
  for (Index p = 0; p < log_ls.size(); ++p) {
    log_ls(p) += 0.5 * n01(rng);
  }
}

inline std::string restart_diagnostics(const std::vector<RestartReport> &reports) {
  std::ostringstream msg;
  msg << "all " << reports.size() << " restarts failed:";
  for (const auto &r : reports) {
    msg << "\n  restart " << r.restart << ": " << r.message;
  }
  return msg.str();
}

inline Index pick_best(const std::vector<RestartReport> &reports) {
  Index best = -1;
  for (const auto &r : reports) {
    if (r.ok && (best < 0 ||
                 r.final_value > reports[static_cast<std::size_t>(best)].final_value)) {
      best = r.restart;
    }
  }
  return best;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Single-task training

struct GPTrainOptions {
  KernelKind kernel = KernelKind::SquaredExponential;
  /// Fit on standardized targets; the returned model is expressed in the
  /// original units through its constant mean and rescaled variances.
  bool standardize = true;
  /// Learn a constant prior mean instead of fixing it at zero.
  bool learn_mean = false;
};

struct GPTrainResult {
  GPModel model;
  GPParameters parameters; // on the standardized scale when standardizing
  double target_mean = 0.0;
  double target_scale = 1.0;
  double log_marginal_likelihood = 0.0;
  std::vector<RestartReport> restarts;
  Index best_restart = 0;
};

/// Fits the GP whose hyperparameters were learned on targets standardized
/// as (y - target_mean) / target_scale, expressed back in original units.
inline GPModel gp_model_from_parameters(const GPParameters &p, double target_mean,
                                        double target_scale, const Matrix &x,
                                        const Vector &y) {
  ScalarKernelSpec kernel = p.kernel;
  const double s2 = target_scale * target_scale;
  kernel.log_signal_variance += std::log(s2);
  return gp_fit(kernel, p.noise_variance() * s2, x, y,
                target_mean + target_scale * p.mean);
}

/// The deterministic starting point of one restart.
inline GPParameters gp_initial_parameters(KernelKind kind, const Matrix &x,
                                          const Vector &y, Index restart,
                                          std::uint64_t seed) {
  auto rng = detail::restart_rng(seed, restart);
  const double var = detail::sample_variance_or(y, 1.0);
  GPParameters p;
  p.kernel.kind = kind;
  p.kernel.log_lengthscales = detail::initial_log_lengthscales(x);
  detail::perturb_lengthscales(p.kernel.log_lengthscales, restart, rng);
  p.kernel.log_signal_variance = std::log(var);
  p.log_noise_variance = std::log(0.01 * var);
  return p;
}

inline GPTrainResult train_gp(const Matrix &x, const Vector &y,
                              const TrainConfig &config,
                              const GPTrainOptions &opts = {},
                              const TraceSink &trace = {}) {
  config.validate();
  require_shape(x.rows() >= 1 && x.rows() == y.size(),
                "train_gp: need matching, nonempty X and Y");
  GPTrainResult result;
  if (opts.standardize) {
    result.target_mean = y.mean();
    result.target_scale = std::sqrt(detail::sample_variance_or(y, 1.0));
  }
  const Vector ys =
      ((y.array() - result.target_mean) / result.target_scale).matrix();

  const ParameterSchema schema = gp_schema(x.cols(), opts.learn_mean);
  const double log_floor = std::log(config.noise_floor);
  std::vector<GPParameters> winners;

  for (Index r = 0; r < config.num_restarts; ++r) {
    RestartReport report;
    report.restart = r;
    const GPParameters init =
        gp_initial_parameters(opts.kernel, x, ys, r, config.seed);
    const Vector full0 = flatten(init);
    auto objective = [&](const Vector &v) {
      const GPParameters p = unflatten(schema.unpack(v, full0), init);
      auto lml =
          gp_log_marginal_likelihood(p.kernel, p.noise_variance(), x, ys, p.mean);
      lml.gradient = schema.select(lml.gradient);
      return lml;
    };
    auto project = [&](Vector &v) {
      const Index noise = x.cols() + 1;
      v(noise) = std::max(v(noise), log_floor);
    };
    try {
      const AdamResult run = adam_maximize(objective, schema.pack(full0),
                                           config.adam(), project, trace, r);
      report.ok = true;
      report.initial_value = run.initial_value;
      report.final_value = run.best_value;
      report.iterations = run.iterations;
      report.message = run.stop_reason;
      winners.push_back(unflatten(schema.unpack(run.best_point, full0), init));
    } catch (const Error &e) {
      report.message = e.what();
      winners.push_back(init);
    }
    result.restarts.push_back(report);
  }

  const Index best = detail::pick_best(result.restarts);
  if (best < 0) {
    throw TrainingFailedError(detail::restart_diagnostics(result.restarts));
  }
  result.best_restart = best;
  result.parameters = winners[static_cast<std::size_t>(best)];
  result.log_marginal_likelihood =
      result.restarts[static_cast<std::size_t>(best)].final_value;

  result.model = gp_model_from_parameters(result.parameters, result.target_mean,
                                          result.target_scale, x, y);
  return result;
}

// ---------------------------------------------------------------------------
// Multi-task training

struct MTGPFamily {
  KernelKind kernel = KernelKind::SquaredExponential;
  /// Number of latent terms Q; 0 selects Q = D.
  Index num_terms = 0;
  /// Rank R of each W^(q).
  Index rank = 1;
  /// Learn task-specific variances γ (full LMC). SLFM pins γ ≡ 0.
  bool learn_gamma = false;
  /// Q = D indicator structure: term q loads only task q. Tasks share no
  /// information.
  bool decoupled = false;
  bool standardize = true;
  /// Learn a constant prior mean per task instead of fixing it at zero.
  bool learn_mean = false;

  static MTGPFamily slfm(KernelKind k = KernelKind::SquaredExponential) {
    return {k, 0, 1, false, false, true, false};
  }
  static MTGPFamily lmc(Index rank, KernelKind k = KernelKind::SquaredExponential) {
    return {k, 0, rank, true, false, true, false};
  }
};

struct MTGPTrainResult {
  MTGPModel model;
  MTGPParameters parameters;
  ParameterSchema schema;
  double log_marginal_likelihood = 0.0;
  std::vector<RestartReport> restarts;
  Index best_restart = 0;
};

inline MTGPSchemaOptions schema_options(const MTGPFamily &family,
                                        const MultiTaskKernelSpec &spec) {
  MTGPSchemaOptions o;
  o.learn_gamma = family.learn_gamma;
  o.learn_mean = family.learn_mean;
  if (family.decoupled) {
    for (std::size_t q = 0; q < spec.terms.size(); ++q) {
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask =
          Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(
              spec.num_tasks, spec.terms[q].rank(), false);
      mask.row(static_cast<Index>(q)).setConstant(true);
      o.loading_mask.push_back(mask);
    }
  }
  return o;
}

/// The deterministic starting point of one restart on (already
/// standardized, if requested) data.
inline MTGPParameters mtgp_initial_parameters(const MTGPFamily &family,
                                              const MultiTaskDataset &data,
                                              Index restart, std::uint64_t seed) {
  auto rng = detail::restart_rng(seed, restart);
  std::normal_distribution<double> loading(0.0, 0.5);
  const Index num_tasks = data.num_tasks();
  const Index q_count = family.decoupled || family.num_terms <= 0
                            ? num_tasks
                            : family.num_terms;
  const Index rank = family.decoupled ? 1 : family.rank;
  require_shape(rank >= 1, "multi-task family: rank must be at least 1");

  Vector task_var(num_tasks);
  for (Index d = 0; d < num_tasks; ++d) {
    task_var(d) = detail::sample_variance_or(data.task(d).targets, 1.0);
  }
  const Vector base_log_ls = detail::initial_log_lengthscales(data.stacked_inputs());

  MTGPParameters p;
  p.kernel.num_tasks = num_tasks;
  for (Index q = 0; q < q_count; ++q) {
    CoregionalizationTerm term;
    term.base_kernel.kind = family.kernel;
    term.base_kernel.log_lengthscales = base_log_ls;
    detail::perturb_lengthscales(term.base_kernel.log_lengthscales, restart, rng);
    term.base_kernel.log_signal_variance = 0.0;
    term.loadings = Matrix::Zero(num_tasks, rank);
    for (Index d = 0; d < num_tasks; ++d) {
      for (Index c = 0; c < rank; ++c) {
        const double w = loading(rng);
        if (!family.decoupled || d == q) {
          term.loadings(d, c) = w;
        }
      }
    }
    if (family.decoupled) {
      // Start each indicator loading at the task's own scale.
      term.loadings(q, 0) = std::sqrt(task_var(q));
    }
    term.log_gamma = family.learn_gamma
                         ? (0.1 * task_var).array().log().matrix().eval()
                         : Vector::Constant(num_tasks,
                                            -std::numeric_limits<double>::infinity());
    p.kernel.terms.push_back(std::move(term));
  }
  p.log_noise_variances = (0.01 * task_var).array().log();
  p.prior_mean = Vector::Zero(num_tasks);
  return p;
}

inline MTGPTrainResult train_mtgp(const MultiTaskDataset &dataset,
                                  const TrainConfig &config,
                                  const MTGPFamily &family = MTGPFamily::slfm(),
                                  const TraceSink &trace = {}) {
  config.validate();
  MTGPFitOptions fit;
  fit.standardize = family.standardize;
  const Standardization stdz = family.standardize
                                   ? Standardization::from_data(dataset)
                                   : Standardization::identity(dataset.num_tasks());
  const MultiTaskDataset scaled = stdz.apply(dataset);
  // Standardizing inside the objective would repeat work; the scaled data
  // is already on the model's internal scale.
  MTGPFitOptions inner = fit;
  inner.standardize = false;

  MTGPTrainResult result;
  const double log_floor = std::log(config.noise_floor);
  std::vector<MTGPParameters> winners;

  for (Index r = 0; r < config.num_restarts; ++r) {
    RestartReport report;
    report.restart = r;
    const MTGPParameters init =
        mtgp_initial_parameters(family, scaled, r, config.seed);
    const ParameterSchema schema =
        mtgp_schema(init.kernel, schema_options(family, init.kernel));
    if (r == 0) {
      result.schema = schema;
    }
    const Vector full0 = flatten(init);
    const auto layout = GradientLayout::of(init.kernel);
    auto objective = [&](const Vector &v) {
      const MTGPParameters p = unflatten(schema.unpack(v, full0), init);
      MTGPFitOptions o = inner;
      o.prior_mean = p.prior_mean;
      auto lml = mtgp_log_marginal_likelihood(p.kernel, p.noise_variances(), scaled, o);
      lml.gradient = schema.select(lml.gradient);
      return lml;
    };
    // Positions of the log-noise entries inside the packed vector.
    std::vector<Index> noise_slots;
    for (Index i = 0; i < schema.size(); ++i) {
      const Index full = schema.entries[static_cast<std::size_t>(i)].full_index;
      if (full >= layout.log_noise && full < layout.log_noise + dataset.num_tasks()) {
        noise_slots.push_back(i);
      }
    }
    auto project = [&](Vector &v) {
      for (Index i : noise_slots) {
        v(i) = std::max(v(i), log_floor);
      }
    };
    try {
      const AdamResult run = adam_maximize(objective, schema.pack(full0),
                                           config.adam(), project, trace, r);
      report.ok = true;
      report.initial_value = run.initial_value;
      report.final_value = run.best_value;
      report.iterations = run.iterations;
      report.message = run.stop_reason;
      winners.push_back(unflatten(schema.unpack(run.best_point, full0), init));
    } catch (const Error &e) {
      report.message = e.what();
      winners.push_back(init);
    }
    result.restarts.push_back(report);
  }

  const Index best = detail::pick_best(result.restarts);
  if (best < 0) {
    throw TrainingFailedError(detail::restart_diagnostics(result.restarts));
  }
  result.best_restart = best;
  result.parameters = winners[static_cast<std::size_t>(best)];
  result.log_marginal_likelihood =
      result.restarts[static_cast<std::size_t>(best)].final_value;
  fit.prior_mean = result.parameters.prior_mean;
  result.model = mtgp_fit(result.parameters.kernel,
                          result.parameters.noise_variances(), dataset, fit);
  return result;
}

} // namespace mtgp
