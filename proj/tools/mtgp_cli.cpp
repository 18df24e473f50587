// mtgp: train, predict, benchmark and self-check for exact single- and
// multi-task Gaussian process regression.
//
// Exit codes: 0 success, 1 check failure, 2 input validation, 3 computation
// failure.

#include "mtgp.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using mtgp::Index;
using mtgp::Matrix;
using mtgp::Vector;
using mtgp::io::Json;

namespace {

enum ExitCode { kOk = 0, kCheckFailed = 1, kInvalidInput = 2, kComputeFailed = 3 };

struct Options {
  std::string data;
  std::string config;
  std::string model;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<double> correlations;
  std::vector<std::string> sizes;
  std::optional<Index> replicates;
  std::string trace;
  std::string inject_fault;
};

std::ofstream open_output(const fs::path &path) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw mtgp::ValidationError(path.string() + ": cannot open for writing");
  }
  return out;
}

fs::path under(const std::string &dir, const std::string &file) {
  const fs::path p(file);
  return dir.empty() || p.is_absolute() ? p : fs::path(dir) / p;
}

Json restart_json(const std::vector<mtgp::RestartReport> &reports) {
  Json a = Json::array();
  for (const auto &r : reports) {
    Json j{{"restart", r.restart},
           {"ok", r.ok},
           {"iterations", r.iterations}};
    if (r.ok) {
      j["initial_log_marginal_likelihood"] = r.initial_value;
      j["final_log_marginal_likelihood"] = r.final_value;
    } else {
      j["message"] = r.message;
    }
    a.push_back(j);
  }
  return a;
}

int cmd_train(const Options &o) {
  if (o.data.empty() || o.config.empty()) {
    throw mtgp::ValidationError("train: --data and --config are required");
  }
  mtgp::io::RunConfig cfg = mtgp::io::read_run_config(o.config);
  if (o.seed) {
    cfg.train.seed = *o.seed;
  }
  const auto file = mtgp::io::read_task_data(o.data);
  const auto &data = file.dataset;
  if (cfg.family == mtgp::io::ModelFamily::GP && data.num_tasks() != 1) {
    throw mtgp::ValidationError(o.data + ": family 'gp' needs a single task, found " +
                                std::to_string(data.num_tasks()));
  }

  std::unique_ptr<std::ofstream> trace_file;
  mtgp::TraceSink trace;
  if (!o.trace.empty()) {
    trace_file = std::make_unique<std::ofstream>(open_output(o.trace));
    trace = [&out = *trace_file](const mtgp::TraceRecord &r) {
      out << Json{{"restart", r.restart},
                  {"iteration", r.iteration},
                  {"objective", r.objective},
                  {"gradient_norm", r.gradient_norm}}
                 .dump()
          << '\n';
    };
  }

  const auto start = std::chrono::steady_clock::now();
  mtgp::io::SavedModel saved;
  std::vector<mtgp::RestartReport> restarts;
  if (cfg.family == mtgp::io::ModelFamily::GP) {
    const auto &task = data.task(0);
    mtgp::GPTrainOptions opts;
    opts.kernel = cfg.kernel;
    opts.standardize = cfg.standardize;
    opts.learn_mean = cfg.learn_mean;
    const auto r = mtgp::train_gp(task.inputs, task.targets, cfg.train, opts, trace);
    saved = mtgp::io::saved_from_gp(r, task.inputs, task.targets, cfg);
    restarts = r.restarts;
  } else {
    const auto r = mtgp::train_mtgp(data, cfg.train, cfg.mtgp_family(), trace);
    saved = mtgp::io::saved_from_mtgp(r, data, cfg);
    restarts = r.restarts;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const fs::path model_path = under(o.out, cfg.model_out);
  const fs::path metrics_path = under(o.out, cfg.metrics_out);
  if (model_path.has_parent_path()) {
    fs::create_directories(model_path.parent_path());
  }
  mtgp::io::write_model(saved, model_path.string());

  const auto &best = restarts[static_cast<std::size_t>(saved.best_restart)];
  const Json metrics{{"family", mtgp::io::to_string(cfg.family)},
                     {"num_tasks", data.num_tasks()},
                     {"num_points", data.total_size()},
                     {"log_marginal_likelihood", saved.log_marginal_likelihood},
                     {"iterations", best.iterations},
                     {"best_restart", saved.best_restart},
                     {"wall_time_seconds", seconds},
                     {"restarts", restart_json(restarts)}};
  open_output(metrics_path) << metrics.dump(2) << '\n';
  std::cout << "trained " << mtgp::io::to_string(cfg.family) << " on "
            << data.total_size() << " points / " << data.num_tasks()
            << " task(s): log marginal likelihood " << saved.log_marginal_likelihood
            << "\nmodel: " << model_path.string() << "\nmetrics: " << metrics_path.string()
            << '\n';
  return kOk;
}

int cmd_predict(const Options &o) {
  if (o.model.empty() || o.data.empty()) {
    throw mtgp::ValidationError("predict: --model and --data are required");
  }
  const mtgp::io::Predictor predictor(mtgp::io::read_model(o.model));
  const Index saved_dim = predictor.input_dim();
  const auto query = mtgp::io::read_query(o.data);
  const auto &table = query.table;
  if (!table.rows.empty() && query.inputs.cols() != saved_dim) {
    throw mtgp::ValidationError(o.data + ": query has " +
                                std::to_string(query.inputs.cols()) +
                                " input columns but the model expects " +
                                std::to_string(saved_dim));
  }

  const std::size_t n = table.rows.size();
  for (std::size_t r = 0; r < n; ++r) {
    if (query.tasks[r] >= predictor.num_tasks()) {
      throw mtgp::ValidationError(table.source + ":" +
                                  std::to_string(table.line_numbers[r]) +
                                  ": column 'task': task " +
                                  std::to_string(query.tasks[r]) +
                                  " is not in the model (tasks 0.." +
                                  std::to_string(predictor.num_tasks() - 1) + ")");
    }
  }
  Vector mean(static_cast<Index>(n));
  Vector sd(static_cast<Index>(n));
  for (Index task = 0; task < predictor.num_tasks(); ++task) {
    std::vector<Index> rows;
    for (std::size_t r = 0; r < n; ++r) {
      if (query.tasks[r] == task) {
        rows.push_back(static_cast<Index>(r));
      }
    }
    if (rows.empty()) {
      continue;
    }
    const Matrix x = query.inputs(rows, Eigen::all);
    const auto pred = predictor.predict(task, x);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Index k = static_cast<Index>(i);
      mean(rows[i]) = pred.mean(k);
      sd(rows[i]) = std::sqrt(std::max(pred.variance(k), 0.0));
    }
  }

  std::ostringstream csv;
  auto header = table.header;
  header.push_back("mean");
  header.push_back("stddev");
  mtgp::io::write_row(csv, header);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = table.rows[r];
    row.push_back(mtgp::io::format_real(mean(static_cast<Index>(r))));
    row.push_back(mtgp::io::format_real(sd(static_cast<Index>(r))));
    mtgp::io::write_row(csv, row);
  }
  if (o.out.empty()) {
    std::cout << csv.str();
  } else {
    open_output(o.out) << csv.str();
  }
  return kOk;
}

std::vector<mtgp::bench::SizePair> parse_sizes(const std::vector<std::string> &specs) {
  std::vector<mtgp::bench::SizePair> out;
  for (const auto &spec : specs) {
    std::istringstream groups(spec);
    std::string group;
    while (std::getline(groups, group, ';')) {
      long long a = 0;
      long long b = 0;
      char comma = 0;
      std::istringstream in(group);
      if (!(in >> a >> comma >> b) || comma != ',' || !(in >> std::ws).eof()) {
        throw mtgp::ValidationError("--sizes: expected n_primary,n_auxiliary, got '" +
                                    group + "'");
      }
      out.push_back({static_cast<Index>(a), static_cast<Index>(b)});
    }
  }
  return out;
}

std::string level_tag(double r, const mtgp::bench::SizePair &s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "r%.2f_n%lld-%lld", r, static_cast<long long>(s.n_primary),
                static_cast<long long>(s.n_auxiliary));
  return buf;
}

int cmd_benchmark(const Options &o) {
  mtgp::bench::StudyConfig cfg;
  if (!o.config.empty()) {
    cfg = mtgp::io::read_study_config(o.config);
  }
  if (!o.correlations.empty()) {
    cfg.correlations = o.correlations;
  }
  if (!o.sizes.empty()) {
    cfg.sizes = parse_sizes(o.sizes);
  }
  if (o.replicates) {
    cfg.replicates = *o.replicates;
  }
  if (o.seed) {
    cfg.seed = *o.seed;
  }
  cfg.comparison.keep_predictions = true;
  cfg.validate();

  const auto result = mtgp::bench::run_study(cfg);
  const std::string dir = o.out.empty() ? "benchmark" : o.out;
  fs::create_directories(dir);

  {
    auto out = open_output(fs::path(dir) / "runs.csv");
    mtgp::io::write_runs_csv(out, result);
  }
  open_output(fs::path(dir) / "summary.json")
      << mtgp::io::summary_json(cfg, result).dump(2) << '\n';
  const std::string table = mtgp::io::aligned_table(result);
  open_output(fs::path(dir) / "table.txt") << table;
  {
    auto out = open_output(fs::path(dir) / "curves.csv");
    mtgp::io::write_curves_csv(out, result);
  }
  for (const auto &run : result.runs) {
    if (run.replicate != 0 || !run.predictions) {
      continue;
    }
    const std::string tag = level_tag(run.target_correlation,
                                      {run.n_primary, run.n_auxiliary});
    auto predictions = open_output(fs::path(dir) / ("predictions_" + tag + ".csv"));
    mtgp::io::write_predictions_csv(predictions, *run.predictions);
    auto training = open_output(fs::path(dir) / ("training_" + tag + ".csv"));
    mtgp::io::write_training_points_csv(training, *run.predictions);
  }
  std::cout << table << "\n"
            << result.rows.size() << " rows from " << result.runs.size()
            << " runs; artifacts in " << dir << '\n';
  return kOk;
}

int cmd_check(const Options &o) {
  mtgp::check::SuiteOptions s;
  s.seed = o.seed.value_or(0);
  s.inject_fault = o.inject_fault;
  if (!s.inject_fault.empty()) {
    const auto names = mtgp::check::check_names();
    if (std::find(names.begin(), names.end(), s.inject_fault) == names.end()) {
      throw mtgp::ValidationError("--inject-fault: unknown check '" + s.inject_fault + "'");
    }
  }
  bool all = true;
  for (const auto &r : mtgp::check::run_suite(s)) {
    std::printf("%-18s %s  worst %.3e  tolerance %.0e  (%s)\n", r.name.c_str(),
                r.passed ? "PASS" : "FAIL", r.worst, r.tolerance, r.detail.c_str());
    all = all && r.passed;
  }
  std::printf("%s\n", all ? "all checks passed" : "some checks FAILED");
  return all ? kOk : kCheckFailed;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Exact single- and multi-task Gaussian process regression"};
  app.require_subcommand(1);
  Options o;

  auto add_seed = [&](CLI::App *cmd) {
    cmd->add_option("--seed", o.seed, "Random seed (overrides the config)");
  };

  auto *train = app.add_subcommand("train", "Fit a model to a CSV dataset");
  train->add_option("--data", o.data, "Training CSV: x1..xP, task, y")->required();
  train->add_option("--config", o.config, "Run configuration JSON")->required();
  train->add_option("--out", o.out, "Directory for the model and metrics files");
  train->add_option("--trace", o.trace, "Write per-iteration optimizer trace (JSON lines)");
  add_seed(train);

  auto *predict = app.add_subcommand("predict", "Predict with a saved model");
  predict->add_option("--model", o.model, "Model file written by train")->required();
  predict->add_option("--data", o.data, "Query CSV: x1..xP[, task]")->required();
  predict->add_option("--out", o.out, "Output CSV (default: standard output)");

  auto *bench = app.add_subcommand("benchmark", "Run the Forrester MTGP-vs-GP study");
  bench->add_option("--config", o.config, "Study configuration JSON");
  bench->add_option("--out", o.out, "Artifact directory (default: benchmark)");
  bench->add_option("--correlations", o.correlations, "Target correlations")
      ->delimiter(',');
  bench->add_option("--sizes", o.sizes,
                    "Size pairs n_primary,n_auxiliary (repeat or separate with ';')");
  bench->add_option("--replicates", o.replicates, "Replicates per cell");
  add_seed(bench);

  auto *check = app.add_subcommand("check", "Run the embedded verification suite");
  add_seed(check);
  check->add_option("--inject-fault", o.inject_fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalidInput;
  }

  try {
    if (*train) {
      return cmd_train(o);
    }
    if (*predict) {
      return cmd_predict(o);
    }
    if (*bench) {
      return cmd_benchmark(o);
    }
    return cmd_check(o);
  } catch (const mtgp::ValidationError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const mtgp::InputShapeError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const mtgp::DomainError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const std::exception &e) {
    std::cerr << "computation failed: " << e.what() << '\n';
    return kComputeFailed;
  }
}
