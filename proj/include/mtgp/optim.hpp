#pragma once

#include "mtgp/common.hpp"
#include "mtgp/gp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace mtgp {

/// Objective value and gradient at a point, as produced by the likelihoods.
using Objective = std::function<LikelihoodResult(const Vector &)>;

struct AdamOptions {
  double learning_rate = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  Index max_iterations = 2000;
  /// Stop once |f_t - f_{t-window}| <= tolerance * max(1, |f_t|).
  double tolerance = 1e-7;
  Index window = 20;
};

struct TraceRecord {
  Index restart = 0;
  Index iteration = 0;
  double objective = 0.0;
  double gradient_norm = 0.0;
};

using TraceSink = std::function<void(const TraceRecord &)>;

struct AdamResult {
  Vector best_point;
  double best_value = -std::numeric_limits<double>::infinity();
  double initial_value = -std::numeric_limits<double>::infinity();
  Index iterations = 0;
  bool converged = false;
  std::string stop_reason;
};

/// Gradient ascent with bias-corrected Adam moments. Returns the best
/// iterate visited, so the result never scores below the starting point.
/// `project` may clamp coordinates after each step. Evaluation failures
/// (IllConditionedError) after the first step end the run early.
inline AdamResult adam_maximize(const Objective &objective, Vector x,
                                const AdamOptions &opts,
                                const std::function<void(Vector &)> &project = {},
                                const TraceSink &trace = {}, Index restart = 0) {
  AdamResult out;
  if (project) {
    project(x);
  }
  LikelihoodResult f = objective(x); // failures here propagate
  if (!std::isfinite(f.value) || !f.gradient.allFinite()) {
    throw IllConditionedError("objective is not finite at the initial point");
  }
  out.initial_value = f.value;
  out.best_value = f.value;
  out.best_point = x;

  Vector m = Vector::Zero(x.size());
  Vector v = Vector::Zero(x.size());
  std::vector<double> history{f.value};
  double b1t = 1.0;
  double b2t = 1.0;
  out.stop_reason = "max_iterations";

  for (Index t = 1; t <= opts.max_iterations; ++t) {
    if (trace) {
      trace({restart, t - 1, f.value, f.gradient.norm()});
    }
    m = opts.beta1 * m + (1.0 - opts.beta1) * f.gradient;
    v = opts.beta2 * v + (1.0 - opts.beta2) * f.gradient.cwiseAbs2();
    b1t *= opts.beta1;
    b2t *= opts.beta2;
    const Vector m_hat = m / (1.0 - b1t);
    const Vector v_hat = v / (1.0 - b2t);
    x.array() += opts.learning_rate * m_hat.array() /
                 (v_hat.array().sqrt() + opts.epsilon);
    if (project) {
      project(x);
    }
    out.iterations = t;
    try {
      f = objective(x);
    } catch (const IllConditionedError &) {
      out.stop_reason = "factorization_failed";
      break;
    }
    if (!std::isfinite(f.value) || !f.gradient.allFinite()) {
      out.stop_reason = "non_finite_objective";
      break;
    }
    if (f.value > out.best_value) {
      out.best_value = f.value;
      out.best_point = x;
    }
    history.push_back(f.value);
    const auto w = static_cast<std::size_t>(opts.window);
    if (history.size() > w) {
      const double old = history[history.size() - 1 - w];
      if (std::abs(f.value - old) <=
          opts.tolerance * std::max(1.0, std::abs(f.value))) {
        out.converged = true;
        out.stop_reason = "converged";
        break;
      }
    }
  }
  return out;
}

/// Worst relative error between the analytic gradient and central finite
/// differences, relative to max(|analytic|, |numeric|, 1e-8).
inline double check_gradients(const Objective &objective, const Vector &point,
                              double step = 1e-6) {
  const Vector analytic = objective(point).gradient;
  require_shape(analytic.size() == point.size(),
                "check_gradients: gradient size differs from point size");
  double worst = 0.0;
  for (Index i = 0; i < point.size(); ++i) {
    Vector hi = point;
    Vector lo = point;
    hi(i) += step;
    lo(i) -= step;
    const double numeric =
        (objective(hi).value - objective(lo).value) / (2.0 * step);
    const double denom =
        std::max({std::abs(analytic(i)), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic(i) - numeric) / denom);
  }
  return worst;
}

} // namespace mtgp
