#pragma once

#include "mtgp/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace mtgp::bench {

/// f(x) = a (6x - 2)² sin(12x - 4) + b (x - 0.5) on [0, 1].
struct ForresterParams {
  double a = 1.0;
  double b = 0.0;
};

inline double forrester(double x, const ForresterParams &p) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw DomainError("forrester: x must lie in [0, 1], got " + std::to_string(x));
  }
  const double s = 6.0 * x - 2.0;
  return p.a * (s * s * std::sin(12.0 * x - 4.0)) + p.b * (x - 0.5);
}

inline Vector forrester(const Vector &x, const ForresterParams &p) {
  Vector y(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    y(i) = forrester(x(i), p);
  }
  return y;
}

inline double pearson_correlation(const Vector &y1, const Vector &y2) {
  require_shape(y1.size() == y2.size(), "pearson_correlation: length mismatch");
  require_shape(y1.size() >= 2, "pearson_correlation: need at least two values");
  const Eigen::ArrayXd a = y1.array() - y1.mean();
  const Eigen::ArrayXd b = y2.array() - y2.mean();
  const double saa = a.square().sum();
  const double sbb = b.square().sum();
  if (!(saa > 0.0) || !(sbb > 0.0)) {
    throw UndefinedCorrelationError("pearson_correlation: zero variance input");
  }
  const double r = (a * b).sum() / std::sqrt(saa * sbb);
  return std::clamp(r, -1.0, 1.0);
}

/// n evenly spaced points covering [0, 1] inclusive.
inline Vector uniform_grid(Index n) {
  return Vector::LinSpaced(n, 0.0, 1.0);
}

struct CalibrationResult {
  ForresterParams params;
  double achieved_r = 0.0;
};

struct CalibrationOptions {
  double a_min = 0.0, a_max = 1.5;
  double b_min = -15.0, b_max = 15.0;
  Index grid_points = 1000;
  double tolerance = 0.03;
  Index coarse_a = 31;
  Index coarse_b = 61;
  Index refine_levels = 4;
  Index refine_points = 21;
};

/// Finds auxiliary coefficients (a, b) whose Forrester curve has Pearson
/// correlation `target_r` with the canonical curve (a=1, b=0) on a dense
/// grid. Coarse grid scan followed by successively finer local scans;
/// exact ties go to the candidate nearest (1, 0).
inline CalibrationResult calibrate_auxiliary(double target_r,
                                             const CalibrationOptions &opts = {}) {
  if (!(target_r > 0.0 && target_r <= 1.0)) {
    throw DomainError("calibrate_auxiliary: target correlation must be in (0, 1]");
  }
  const Vector x = uniform_grid(opts.grid_points);
  const Vector primary = forrester(x, {1.0, 0.0});
  Vector shape(x.size());
  Vector trend(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const double s = 6.0 * x(i) - 2.0;
    shape(i) = s * s * std::sin(12.0 * x(i) - 4.0);
    trend(i) = x(i) - 0.5;
  }

  struct Best {
    double err = std::numeric_limits<double>::infinity();
    double dist = std::numeric_limits<double>::infinity();
    ForresterParams p;
    double r = 0.0;
  } best;

  auto consider = [&](double a, double b) {
    const Vector aux = a * shape + b * trend;
    double r = 0.0;
    try {
      r = pearson_correlation(primary, aux);
    } catch (const UndefinedCorrelationError &) {
      return;
    }
    const double err = std::abs(r - target_r);
    const double dist = (a - 1.0) * (a - 1.0) + b * b;
    if (err < best.err || (err == best.err && dist < best.dist)) {
      best = {err, dist, {a, b}, r};
    }
  };

  auto scan = [&](double a_lo, double a_hi, Index na, double b_lo, double b_hi,
                  Index nb) {
    for (Index i = 0; i < na; ++i) {
      const double a =
          na == 1 ? a_lo : a_lo + (a_hi - a_lo) * static_cast<double>(i) /
                                      static_cast<double>(na - 1);
      for (Index j = 0; j < nb; ++j) {
        const double b =
            nb == 1 ? b_lo : b_lo + (b_hi - b_lo) * static_cast<double>(j) /
                                        static_cast<double>(nb - 1);
        consider(a, b);
      }
    }
  };

  scan(opts.a_min, opts.a_max, opts.coarse_a, opts.b_min, opts.b_max, opts.coarse_b);
  double half_a = (opts.a_max - opts.a_min) / static_cast<double>(opts.coarse_a - 1);
  double half_b = (opts.b_max - opts.b_min) / static_cast<double>(opts.coarse_b - 1);
  for (Index level = 0; level < opts.refine_levels; ++level) {
    const ForresterParams c = best.p;
    scan(std::max(opts.a_min, c.a - half_a), std::min(opts.a_max, c.a + half_a),
         opts.refine_points, std::max(opts.b_min, c.b - half_b),
         std::min(opts.b_max, c.b + half_b), opts.refine_points);
    half_a *= 2.0 / static_cast<double>(opts.refine_points - 1);
    half_b *= 2.0 / static_cast<double>(opts.refine_points - 1);
  }

  if (!(best.err <= opts.tolerance)) {
    throw CalibrationError("calibrate_auxiliary: cannot reach r = " +
                           std::to_string(target_r) + " inside the search box");
  }
  return {best.p, best.r};
}

inline double rmse(const Vector &predicted, const Vector &actual) {
  require_shape(predicted.size() == actual.size(), "rmse: length mismatch");
  require_shape(predicted.size() > 0, "rmse: empty input");
  return std::sqrt((predicted - actual).squaredNorm() /
                   static_cast<double>(predicted.size()));
}

/// 100 (gp - mtgp) / gp; zero when the baseline error is zero.
inline double percent_improvement(double gp_rmse, double mtgp_rmse) {
  if (!(gp_rmse > 0.0)) {
    return 0.0;
  }
  return 100.0 * (gp_rmse - mtgp_rmse) / gp_rmse;
}

} // namespace mtgp::bench
