#pragma once

#include "mtgp/common.hpp"
#include "mtgp/dataset.hpp"
#include "mtgp/io/config.hpp"
#include "mtgp/multitask.hpp"
#include "mtgp/parameters.hpp"
#include "mtgp/training.hpp"

#include <json.hpp>

#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace mtgp::io {

inline constexpr int kModelSchemaVersion = 1;
inline constexpr const char *kModelFormat = "mtgp-model";

/// Exact binary representation of a double as C99 hex-float text.
inline std::string hex_real(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline double parse_hex_real(const std::string &s, const std::string &what) {
  char *end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw ValidationError(what + ": '" + s + "' is not a hex-float value");
  }
  return v;
}

/// 64-bit FNV-1a over the shape and the binary values of a dataset.
inline std::uint64_t fingerprint(const MultiTaskDataset &data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void *p, std::size_t n) {
    const auto *b = static_cast<const unsigned char *>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  auto mix_index = [&](Index v) {
    const auto u = static_cast<std::int64_t>(v);
    mix(&u, sizeof u);
  };
  auto mix_real = [&](double v) { mix(&v, sizeof v); };
  mix_index(data.num_tasks());
  mix_index(data.input_dim());
  for (Index d = 0; d < data.num_tasks(); ++d) {
    const auto &t = data.task(d);
    mix_index(t.size());
    for (Index i = 0; i < t.inputs.rows(); ++i) {
      for (Index p = 0; p < t.inputs.cols(); ++p) {
        mix_real(t.inputs(i, p));
      }
      mix_real(t.targets(i));
    }
  }
  return h;
}

inline std::string fingerprint_string(const MultiTaskDataset &data) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx",
                static_cast<unsigned long long>(fingerprint(data)));
  return buf;
}

/// A trained model in serializable form: hyperparameters plus the
/// training data needed to rebuild the exact posterior.
struct SavedModel {
  ModelFamily family = ModelFamily::GP;
  KernelKind kernel = KernelKind::SquaredExponential;
  MultiTaskDataset data;
  bool standardize = true;

  // Single-task models.
  GPParameters gp;
  double target_mean = 0.0;
  double target_scale = 1.0;

  // Multi-task models.
  MTGPParameters mtgp;
  std::vector<bool> free; // per full-parameter entry

  double log_marginal_likelihood = 0.0;
  Index best_restart = 0;
  std::uint64_t seed = 0;

  Index num_tasks() const { return data.num_tasks(); }
  Index input_dim() const { return data.input_dim(); }
};

inline SavedModel saved_from_gp(const GPTrainResult &r, const Matrix &x, const Vector &y,
                                const RunConfig &cfg) {
  SavedModel m;
  m.family = ModelFamily::GP;
  m.kernel = cfg.kernel;
  m.data = MultiTaskDataset(std::vector<TaskData>{TaskData{x, y}});
  m.standardize = cfg.standardize;
  m.gp = r.parameters;
  m.target_mean = r.target_mean;
  m.target_scale = r.target_scale;
  const auto all = gp_schema(x.cols(), true);
  const auto trained = gp_schema(x.cols(), cfg.learn_mean);
  m.free.assign(static_cast<std::size_t>(all.size()), false);
  for (const auto &e : trained.entries) {
    m.free[static_cast<std::size_t>(e.full_index)] = true;
  }
  m.log_marginal_likelihood = r.log_marginal_likelihood;
  m.best_restart = r.best_restart;
  m.seed = cfg.train.seed;
  return m;
}

inline SavedModel saved_from_mtgp(const MTGPTrainResult &r,
                                  const MultiTaskDataset &data, const RunConfig &cfg) {
  SavedModel m;
  m.family = cfg.family;
  m.kernel = cfg.kernel;
  m.data = data;
  m.standardize = cfg.standardize;
  m.mtgp = r.parameters;
  const auto layout = GradientLayout::of(r.parameters.kernel);
  m.free.assign(static_cast<std::size_t>(layout.size), false);
  for (const auto &e : r.schema.entries) {
    m.free[static_cast<std::size_t>(e.full_index)] = true;
  }
  m.log_marginal_likelihood = r.log_marginal_likelihood;
  m.best_restart = r.best_restart;
  m.seed = cfg.train.seed;
  return m;
}

namespace detail {

/// Every entry of the full parameter vector, in layout order.
inline ParameterSchema full_schema(const SavedModel &m) {
  if (m.family == ModelFamily::GP) {
    return gp_schema(m.input_dim(), true);
  }
  MTGPSchemaOptions all;
  all.learn_signal_variance = true;
  all.learn_gamma = true;
  all.learn_mean = true;
  return mtgp_schema(m.mtgp.kernel, all);
}

inline Vector full_vector(const SavedModel &m) {
  return m.family == ModelFamily::GP ? flatten(m.gp) : flatten(m.mtgp);
}

inline Json hex_array(const Vector &v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) {
    a.push_back(hex_real(v(i)));
  }
  return a;
}

inline Vector read_hex_array(const Json &a, const std::string &what) {
  if (!a.is_array()) {
    throw ValidationError(what + ": expected an array");
  }
  Vector v(static_cast<Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_string()) {
      throw ValidationError(what + ": entries must be hex-float strings");
    }
    v(static_cast<Index>(i)) = parse_hex_real(a[i].get<std::string>(), what);
  }
  return v;
}

inline Standardization model_standardization(const SavedModel &m) {
  if (!m.standardize) {
    return Standardization::identity(m.num_tasks());
  }
  if (m.family == ModelFamily::GP) {
    return {Vector::Constant(1, m.target_mean), Vector::Constant(1, m.target_scale)};
  }
  return Standardization::from_data(m.data);
}

template <typename T> T field(const Json &j, const std::string &key, const std::string &what) {
  if (!j.contains(key)) {
    throw ValidationError(what + ": missing key '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception &) {
    throw ValidationError(what + ": key '" + key + "' has the wrong type");
  }
}

} // namespace detail

inline Json to_json(const SavedModel &m) {
  Json j;
  j["format"] = kModelFormat;
  j["schema_version"] = kModelSchemaVersion;
  j["family"] = to_string(m.family);
  j["kernel"] = std::string(to_string(m.kernel));
  j["input_dim"] = m.input_dim();
  j["num_tasks"] = m.num_tasks();
  j["standardize"] = m.standardize;
  if (m.family != ModelFamily::GP) {
    Json terms = Json::array();
    for (const auto &t : m.mtgp.kernel.terms) {
      terms.push_back({{"rank", t.rank()}});
    }
    j["terms"] = terms;
  }

  const auto schema = detail::full_schema(m);
  const Vector values = detail::full_vector(m);
  Json params = Json::array();
  for (const auto &e : schema.entries) {
    params.push_back({{"name", e.name},
                      {"transform", std::string(to_string(e.transform))},
                      {"free", static_cast<bool>(m.free[static_cast<std::size_t>(e.full_index)])},
                      {"value", hex_real(values(e.full_index))}});
  }
  j["parameters"] = params;

  const Standardization s = detail::model_standardization(m);
  j["standardization"] = {{"mean", detail::hex_array(s.mean)},
                          {"scale", detail::hex_array(s.scale)}};

  Json tasks = Json::array();
  for (Index d = 0; d < m.num_tasks(); ++d) {
    const auto &t = m.data.task(d);
    Json rows = Json::array();
    for (Index i = 0; i < t.size(); ++i) {
      rows.push_back(detail::hex_array(t.inputs.row(i).transpose()));
    }
    tasks.push_back({{"inputs", rows}, {"targets", detail::hex_array(t.targets)}});
  }
  j["training_data"] = {{"tasks", tasks}};
  j["fingerprint"] = fingerprint_string(m.data);
  j["training"] = {{"log_marginal_likelihood", hex_real(m.log_marginal_likelihood)},
                   {"best_restart", m.best_restart},
                   {"seed", m.seed}};
  return j;
}

inline SavedModel from_json(const Json &j, const std::string &what = "model") {
  if (!j.is_object() || detail::field<std::string>(j, "format", what) != kModelFormat) {
    throw ValidationError(what + ": not an mtgp model file");
  }
  const int version = detail::field<int>(j, "schema_version", what);
  if (version != kModelSchemaVersion) {
    throw ValidationError(what + ": unsupported schema_version " +
                          std::to_string(version) + " (supported: " +
                          std::to_string(kModelSchemaVersion) + ")");
  }
  SavedModel m;
  m.family = model_family_from_string(detail::field<std::string>(j, "family", what));
  try {
    m.kernel = kernel_kind_from_string(detail::field<std::string>(j, "kernel", what));
  } catch (const DomainError &e) {
    throw ValidationError(what + ": " + e.what());
  } catch (const InputShapeError &e) {
    throw ValidationError(what + ": " + e.what());
  }
  const auto input_dim = detail::field<Index>(j, "input_dim", what);
  const auto num_tasks = detail::field<Index>(j, "num_tasks", what);
  m.standardize = detail::field<bool>(j, "standardize", what);

  // Training data.
  const Json &td = j.at("training_data").at("tasks");
  if (!td.is_array() || static_cast<Index>(td.size()) != num_tasks) {
    throw ValidationError(what + ": training_data does not match num_tasks");
  }
  std::vector<TaskData> tasks;
  for (std::size_t d = 0; d < td.size(); ++d) {
    const std::string where = what + ": training_data task " + std::to_string(d);
    const Vector y = detail::read_hex_array(td[d].at("targets"), where);
    const Json &rows = td[d].at("inputs");
    if (!rows.is_array() || rows.size() != static_cast<std::size_t>(y.size())) {
      throw ValidationError(where + ": inputs and targets differ in length");
    }
    Matrix x(y.size(), input_dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const Vector row = detail::read_hex_array(rows[i], where);
      if (row.size() != input_dim) {
        throw ValidationError(where + ": input row has the wrong dimension");
      }
      x.row(static_cast<Index>(i)) = row.transpose();
    }
    tasks.push_back({x, y});
  }
  m.data = MultiTaskDataset(std::move(tasks));
  if (detail::field<std::string>(j, "fingerprint", what) != fingerprint_string(m.data)) {
    throw ValidationError(what + ": training data fingerprint mismatch");
  }

  // Parameter template with the right shapes.
  if (m.family == ModelFamily::GP) {
    if (num_tasks != 1) {
      throw ValidationError(what + ": a gp model has exactly one task");
    }
    m.gp.kernel.kind = m.kernel;
    m.gp.kernel.log_lengthscales = Vector::Zero(input_dim);
  } else {
    m.mtgp.kernel.num_tasks = num_tasks;
    for (const auto &t : j.at("terms")) {
      CoregionalizationTerm term;
      term.base_kernel.kind = m.kernel;
      term.base_kernel.log_lengthscales = Vector::Zero(input_dim);
      term.loadings = Matrix::Zero(num_tasks, detail::field<Index>(t, "rank", what));
      term.log_gamma = Vector::Zero(num_tasks);
      m.mtgp.kernel.terms.push_back(std::move(term));
    }
    m.mtgp.log_noise_variances = Vector::Zero(num_tasks);
    m.mtgp.prior_mean = Vector::Zero(num_tasks);
  }

  const auto schema = detail::full_schema(m);
  const Json &params = j.at("parameters");
  if (!params.is_array() || static_cast<Index>(params.size()) != schema.size()) {
    throw ValidationError(what + ": parameter list does not match the model structure");
  }
  Vector values(schema.full_size);
  m.free.assign(static_cast<std::size_t>(schema.full_size), false);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto &e = schema.entries[i];
    const auto name = detail::field<std::string>(params[i], "name", what);
    if (name != e.name) {
      throw ValidationError(what + ": parameter " + std::to_string(i) + " is '" + name +
                            "', expected '" + e.name + "'");
    }
    values(e.full_index) =
        parse_hex_real(detail::field<std::string>(params[i], "value", what), what);
    m.free[static_cast<std::size_t>(e.full_index)] =
        detail::field<bool>(params[i], "free", what);
  }
  if (m.family == ModelFamily::GP) {
    m.gp = unflatten(values, m.gp);
    const Json &s = j.at("standardization");
    m.target_mean = detail::read_hex_array(s.at("mean"), what)(0);
    m.target_scale = detail::read_hex_array(s.at("scale"), what)(0);
  } else {
    m.mtgp = unflatten(values, m.mtgp);
  }

  const auto &tr = j.at("training");
  m.log_marginal_likelihood = parse_hex_real(
      detail::field<std::string>(tr, "log_marginal_likelihood", what), what);
  m.best_restart = detail::field<Index>(tr, "best_restart", what);
  m.seed = detail::field<std::uint64_t>(tr, "seed", what);
  return m;
}

inline void write_model(const SavedModel &m, const std::string &path) {
  std::ofstream out(path);
  if (!out) {
    throw ValidationError(path + ": cannot open for writing");
  }
  out << to_json(m).dump(2) << '\n';
}

inline SavedModel read_model(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError(path + ": cannot open file");
  }
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw ValidationError(path + ": invalid JSON: " + e.what());
  }
  try {
    return from_json(j, path);
  } catch (const nlohmann::json::exception &e) {
    throw ValidationError(path + ": malformed model file: " + e.what());
  }
}

/// A fitted posterior rebuilt from a saved model, exactly as training
/// produced it.
class Predictor {
public:
  explicit Predictor(const SavedModel &m) : input_dim_(m.input_dim()) {
    if (m.family == ModelFamily::GP) {
      const auto &t = m.data.task(0);
      gp_ = gp_model_from_parameters(m.gp, m.target_mean, m.target_scale, t.inputs,
                                     t.targets);
    } else {
      MTGPFitOptions fit;
      fit.standardize = m.standardize;
      fit.prior_mean = m.mtgp.prior_mean;
      mtgp_ = mtgp_fit(m.mtgp.kernel, m.mtgp.noise_variances(), m.data, fit);
    }
  }

  Index num_tasks() const { return gp_ ? 1 : mtgp_->num_tasks(); }
  Index input_dim() const { return input_dim_; }

  PosteriorPrediction predict(Index task, const Matrix &x) const {
    if (gp_) {
      require_shape(task == 0, "predict: a single-task model only has task 0");
      return gp_predict(*gp_, x);
    }
    return mtgp_predict(*mtgp_, task, x);
  }

private:
  Index input_dim_ = 0;
  std::optional<GPModel> gp_;
  std::optional<MTGPModel> mtgp_;
};

} // namespace mtgp::io
