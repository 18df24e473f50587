#pragma once

#include "mtgp/benchmark.hpp"
#include "mtgp/forrester.hpp"
#include "mtgp/io/config.hpp"
#include "mtgp/io/csv.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace mtgp::io {

/// One line per scenario replicate, sorted by (correlation, size, replicate).
inline void write_runs_csv(std::ostream &out, const bench::StudyResult &r) {
  write_row(out, {"target_correlation", "achieved_correlation", "n_primary",
                  "n_auxiliary", "replicate", "seed", "gp_rmse", "mtgp_rmse",
                  "percent_improvement"});
  for (const auto &run : r.runs) {
    write_row(out, {format_real(run.target_correlation),
                    format_real(run.achieved_correlation), std::to_string(run.n_primary),
                    std::to_string(run.n_auxiliary), std::to_string(run.replicate),
                    std::to_string(run.seed), format_real(run.gp_rmse),
                    format_real(run.mtgp_rmse), format_real(run.percent_improvement)});
  }
}

inline Json summary_json(const bench::StudyConfig &cfg, const bench::StudyResult &r) {
  Json j;
  Json sizes = Json::array();
  for (const auto &s : cfg.sizes) {
    sizes.push_back({s.n_primary, s.n_auxiliary});
  }
  j["config"] = {{"correlations", cfg.correlations},
                 {"sizes", sizes},
                 {"replicates", cfg.replicates},
                 {"seed", cfg.seed},
                 {"n_test", cfg.n_test},
                 {"observation_noise", cfg.observation_noise},
                 {"kernel", std::string(to_string(cfg.comparison.kernel))},
                 {"num_terms", cfg.comparison.family.num_terms},
                 {"rank", cfg.comparison.family.rank},
                 {"learn_gamma", cfg.comparison.family.learn_gamma},
                 {"learning_rate", cfg.train.learning_rate},
                 {"max_iterations", cfg.train.max_iterations},
                 {"convergence_tolerance", cfg.train.convergence_tolerance},
                 {"num_restarts", cfg.train.num_restarts},
                 {"noise_floor", cfg.train.noise_floor}};
  Json cal = Json::array();
  for (const auto &c : r.calibrations) {
    cal.push_back({{"target_correlation", c.target_r},
                   {"achieved_correlation", c.calibration.achieved_r},
                   {"a", c.calibration.params.a},
                   {"b", c.calibration.params.b}});
  }
  j["calibrations"] = cal;
  Json rows = Json::array();
  for (const auto &row : r.rows) {
    rows.push_back({{"target_correlation", row.target_correlation},
                    {"achieved_correlation", row.achieved_correlation},
                    {"n_primary", row.sizes.n_primary},
                    {"n_auxiliary", row.sizes.n_auxiliary},
                    {"replicates", row.replicates},
                    {"gp_rmse_mean", row.gp_rmse.mean},
                    {"gp_rmse_sd", row.gp_rmse.sd},
                    {"mtgp_rmse_mean", row.mtgp_rmse.mean},
                    {"mtgp_rmse_sd", row.mtgp_rmse.sd},
                    {"improvement_mean", row.improvement.mean},
                    {"improvement_sd", row.improvement.sd},
                    {"mtgp_win_fraction", row.mtgp_win_fraction}});
  }
  j["rows"] = rows;
  return j;
}

namespace detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string pad(const std::string &s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

} // namespace detail

/// Human-readable table in the layout "Task Pair | MTGP \ GP RMSE |
/// % Improvement", one block per correlation level.
inline std::string aligned_table(const bench::StudyResult &r) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"Correlation", "Task Pair (n1, n2)", "MTGP \\ GP RMSE",
                   "% Improvement (mean ± sd)", "MTGP wins", "Runs"});
  for (const auto &row : r.rows) {
    const Index wins = static_cast<Index>(
        std::lround(row.mtgp_win_fraction * static_cast<double>(row.replicates)));
    cells.push_back({detail::fixed(row.target_correlation, 2) + " (" +
                         detail::fixed(row.achieved_correlation, 3) + ")",
                     "(" + std::to_string(row.sizes.n_primary) + ", " +
                         std::to_string(row.sizes.n_auxiliary) + ")",
                     detail::fixed(row.mtgp_rmse.mean, 2) + " \\ " +
                         detail::fixed(row.gp_rmse.mean, 2),
                     detail::fixed(row.improvement.mean, 2) + " ± " +
                         detail::fixed(row.improvement.sd, 2),
                     std::to_string(wins) + "/" + std::to_string(row.replicates),
                     std::to_string(row.replicates)});
  }
  // "±" is two bytes but one column wide.
  auto width = [](const std::string &s) {
    std::size_t w = 0;
    for (unsigned char c : s) {
      w += (c & 0xC0) != 0x80 ? 1 : 0;
    }
    return w;
  };
  std::vector<std::size_t> widths(cells[0].size(), 0);
  for (const auto &row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      widths[c] = std::max(widths[c], width(row[c]));
    }
  }
  std::ostringstream out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t c = 0; c < cells[i].size(); ++c) {
      const std::string &s = cells[i][c];
      out << s << std::string(widths[c] - width(s), ' ');
      out << (c + 1 < cells[i].size() ? "  " : "\n");
    }
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : widths) {
        total += w + 2;
      }
      out << std::string(total - 2, '-') << '\n';
    }
  }
  return out.str();
}

/// Primary and calibrated auxiliary curves on an n-point grid.
inline void write_curves_csv(std::ostream &out, const bench::StudyResult &r,
                             Index n = 201) {
  std::vector<std::string> header{"x", "primary"};
  for (const auto &c : r.calibrations) {
    header.push_back("auxiliary_r" + detail::fixed(c.target_r, 2));
  }
  write_row(out, header);
  const Vector x = bench::uniform_grid(n);
  for (Index i = 0; i < n; ++i) {
    std::vector<std::string> row{format_real(x(i)),
                                 format_real(bench::forrester(x(i), {1.0, 0.0}))};
    for (const auto &c : r.calibrations) {
      row.push_back(format_real(bench::forrester(x(i), c.calibration.params)));
    }
    write_row(out, row);
  }
}

/// Test-grid predictions of one run with ±2σ bands.
inline void write_predictions_csv(std::ostream &out, const bench::ScenarioPredictions &p) {
  write_row(out, {"x", "truth", "gp_mean", "gp_lower", "gp_upper", "mtgp_mean",
                  "mtgp_lower", "mtgp_upper"});
  for (Index i = 0; i < p.x.size(); ++i) {
    const double gs = std::sqrt(p.gp.variance(i));
    const double ms = std::sqrt(p.mtgp.variance(i));
    write_row(out, {format_real(p.x(i)), format_real(p.truth(i)),
                    format_real(p.gp.mean(i)), format_real(p.gp.mean(i) - 2.0 * gs),
                    format_real(p.gp.mean(i) + 2.0 * gs), format_real(p.mtgp.mean(i)),
                    format_real(p.mtgp.mean(i) - 2.0 * ms),
                    format_real(p.mtgp.mean(i) + 2.0 * ms)});
  }
}

/// Training points of one run, both tasks.
inline void write_training_points_csv(std::ostream &out,
                                      const bench::ScenarioPredictions &p) {
  write_row(out, {"task", "x", "y"});
  for (Index i = 0; i < p.primary_train.rows(); ++i) {
    write_row(out, {"0", format_real(p.primary_train(i, 0)),
                    format_real(p.primary_train(i, 1))});
  }
  for (Index i = 0; i < p.auxiliary_train.rows(); ++i) {
    write_row(out, {"1", format_real(p.auxiliary_train(i, 0)),
                    format_real(p.auxiliary_train(i, 1))});
  }
}

} // namespace mtgp::io
