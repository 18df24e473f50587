#pragma once

#include "mtgp/benchmark.hpp"
#include "mtgp/common.hpp"
#include "mtgp/kernel.hpp"
#include "mtgp/training.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <set>
#include <string>

namespace mtgp::io {

using Json = nlohmann::json;

enum class ModelFamily { GP, SLFM, LMC };

inline std::string to_string(ModelFamily f) {
  switch (f) {
  case ModelFamily::GP:
    return "gp";
  case ModelFamily::SLFM:
    return "mtgp-slfm";
  case ModelFamily::LMC:
    return "mtgp-lmc";
  }
  return "gp";
}

inline ModelFamily model_family_from_string(const std::string &s) {
  if (s == "gp") {
    return ModelFamily::GP;
  }
  if (s == "mtgp-slfm") {
    return ModelFamily::SLFM;
  }
  if (s == "mtgp-lmc") {
    return ModelFamily::LMC;
  }
  throw ValidationError("config: key 'family': unknown family '" + s +
                        "' (expected gp, mtgp-slfm or mtgp-lmc)");
}

/// Everything `train` needs besides the data.
struct RunConfig {
  ModelFamily family = ModelFamily::SLFM;
  Index num_terms = 0; // 0 selects one term per task
  Index rank = 1;
  KernelKind kernel = KernelKind::SquaredExponential;
  TrainConfig train;
  bool standardize = true;
  bool learn_mean = false;
  std::string model_out = "model.json";
  std::string metrics_out = "metrics.json";

  MTGPFamily mtgp_family() const {
    MTGPFamily f = family == ModelFamily::LMC ? MTGPFamily::lmc(rank, kernel)
                                              : MTGPFamily::slfm(kernel);
    f.num_terms = num_terms;
    f.standardize = standardize;
    f.learn_mean = learn_mean;
    return f;
  }
};

namespace detail {

inline void reject_unknown(const Json &j, const std::set<std::string> &allowed,
                           const std::string &what) {
  if (!j.is_object()) {
    throw ValidationError(what + ": top level must be a JSON object");
  }
  for (const auto &[key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw ValidationError(what + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
T get_key(const Json &j, const std::string &key, const std::string &what) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception &) {
    throw ValidationError(what + ": key '" + key + "' has the wrong type");
  }
}

inline double positive_real(const Json &j, const std::string &key,
                            const std::string &what) {
  const auto &v = j.at(key);
  if (!v.is_number() || !(v.get<double>() > 0.0)) {
    throw ValidationError(what + ": key '" + key + "' must be a positive number");
  }
  return v.get<double>();
}

inline Index count(const Json &j, const std::string &key, const std::string &what,
                   Index min) {
  const auto &v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < min) {
    throw ValidationError(what + ": key '" + key + "' must be an integer >= " +
                          std::to_string(min));
  }
  return static_cast<Index>(v.get<long long>());
}

inline std::uint64_t seed_value(const Json &j, const std::string &key,
                                const std::string &what) {
  const auto &v = j.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                 v.get<long long>() < 0)) {
    throw ValidationError(what + ": key '" + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline KernelKind kernel_value(const Json &j, const std::string &what) {
  const auto name = get_key<std::string>(j, "kernel", what);
  try {
    return kernel_kind_from_string(name);
  } catch (const Error &) {
    throw ValidationError(what + ": key 'kernel': unknown kernel '" + name +
                          "' (expected se or matern52)");
  }
}

/// Applies the optimizer keys shared by run and study configs.
inline void read_train_keys(const Json &j, TrainConfig &t, const std::string &what) {
  if (j.contains("learning_rate")) {
    t.learning_rate = positive_real(j, "learning_rate", what);
  }
  if (j.contains("max_iterations")) {
    t.max_iterations = count(j, "max_iterations", what, 0);
  }
  if (j.contains("convergence_tolerance")) {
    t.convergence_tolerance = positive_real(j, "convergence_tolerance", what);
  }
  if (j.contains("num_restarts")) {
    t.num_restarts = count(j, "num_restarts", what, 1);
  }
  if (j.contains("seed")) {
    t.seed = seed_value(j, "seed", what);
  }
}

inline Json load_json(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError(path + ": cannot open file");
  }
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw ValidationError(path + ": invalid JSON: " + e.what());
  }
}

} // namespace detail

inline RunConfig run_config_from_json(const Json &j, const std::string &what = "config") {
  detail::reject_unknown(j,
                         {"family", "num_terms", "rank", "kernel", "learning_rate",
                          "max_iterations", "convergence_tolerance", "num_restarts",
                          "seed", "standardize", "learn_mean", "model_out",
                          "metrics_out"},
                         what);
  RunConfig c;
  if (j.contains("family")) {
    c.family = model_family_from_string(detail::get_key<std::string>(j, "family", what));
  }
  if (j.contains("num_terms")) {
    c.num_terms = detail::count(j, "num_terms", what, 0);
  }
  if (j.contains("rank")) {
    c.rank = detail::count(j, "rank", what, 1);
  }
  if (j.contains("kernel")) {
    c.kernel = detail::kernel_value(j, what);
  }
  detail::read_train_keys(j, c.train, what);
  if (j.contains("standardize")) {
    c.standardize = detail::get_key<bool>(j, "standardize", what);
  }
  if (j.contains("learn_mean")) {
    c.learn_mean = detail::get_key<bool>(j, "learn_mean", what);
  }
  if (j.contains("model_out")) {
    c.model_out = detail::get_key<std::string>(j, "model_out", what);
  }
  if (j.contains("metrics_out")) {
    c.metrics_out = detail::get_key<std::string>(j, "metrics_out", what);
  }
  return c;
}

inline RunConfig read_run_config(const std::string &path) {
  return run_config_from_json(detail::load_json(path), path);
}

/// Study configuration file for `benchmark`. Every key is optional.
inline bench::StudyConfig study_config_from_json(const Json &j,
                                                 const std::string &what = "study config") {
  detail::reject_unknown(j,
                         {"correlations", "sizes", "replicates", "seed", "n_test",
                          "observation_noise", "family", "num_terms", "rank", "kernel",
                          "learning_rate", "max_iterations", "convergence_tolerance",
                          "num_restarts", "noise_floor", "threads", "decouple_auxiliary"},
                         what);
  bench::StudyConfig c;
  if (j.contains("correlations")) {
    c.correlations = detail::get_key<std::vector<double>>(j, "correlations", what);
  }
  if (j.contains("sizes")) {
    const auto pairs =
        detail::get_key<std::vector<std::vector<long long>>>(j, "sizes", what);
    c.sizes.clear();
    for (const auto &p : pairs) {
      if (p.size() != 2) {
        throw ValidationError(what + ": key 'sizes': each entry must be [n_primary, n_auxiliary]");
      }
      c.sizes.push_back({static_cast<Index>(p[0]), static_cast<Index>(p[1])});
    }
  }
  if (j.contains("replicates")) {
    c.replicates = detail::count(j, "replicates", what, 1);
  }
  if (j.contains("seed")) {
    c.seed = detail::seed_value(j, "seed", what);
  }
  if (j.contains("n_test")) {
    c.n_test = detail::count(j, "n_test", what, 1);
  }
  if (j.contains("observation_noise")) {
    c.observation_noise = detail::get_key<double>(j, "observation_noise", what);
  }
  if (j.contains("family")) {
    const auto f =
        model_family_from_string(detail::get_key<std::string>(j, "family", what));
    if (f == ModelFamily::GP) {
      throw ValidationError(what + ": key 'family': the study needs a multi-task family");
    }
    c.comparison.family = f == ModelFamily::LMC ? MTGPFamily::lmc(1) : MTGPFamily::slfm();
  }
  if (j.contains("num_terms")) {
    c.comparison.family.num_terms = detail::count(j, "num_terms", what, 0);
  }
  if (j.contains("rank")) {
    c.comparison.family.rank = detail::count(j, "rank", what, 1);
  }
  if (j.contains("kernel")) {
    c.comparison.kernel = detail::kernel_value(j, what);
  }
  detail::read_train_keys(j, c.train, what);
  if (j.contains("noise_floor")) {
    c.train.noise_floor = detail::positive_real(j, "noise_floor", what);
  }
  if (j.contains("threads")) {
    c.threads = static_cast<unsigned>(detail::count(j, "threads", what, 0));
  }
  if (j.contains("decouple_auxiliary")) {
    c.comparison.decouple_auxiliary = detail::get_key<bool>(j, "decouple_auxiliary", what);
  }
  c.validate();
  return c;
}

inline bench::StudyConfig read_study_config(const std::string &path) {
  return study_config_from_json(detail::load_json(path), path);
}

} // namespace mtgp::io
