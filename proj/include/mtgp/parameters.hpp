#pragma once

#include "mtgp/common.hpp"
#include "mtgp/coregionalization.hpp"
#include "mtgp/multitask.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace mtgp {

enum class Transform { Log, Identity };

inline std::string_view to_string(Transform t) {
  return t == Transform::Log ? "log" : "identity";
}

/// Hyperparameters of a single-task GP in optimizer coordinates.
struct GPParameters {
  ScalarKernelSpec kernel;
  double log_noise_variance = 0.0;
  double mean = 0.0;

  double noise_variance() const { return std::exp(log_noise_variance); }
};

/// Hyperparameters of a multi-task GP in optimizer coordinates.
struct MTGPParameters {
  MultiTaskKernelSpec kernel;
  Vector log_noise_variances;
  Vector prior_mean;

  Vector noise_variances() const { return log_noise_variances.array().exp(); }
};

struct ParameterEntry {
  std::string name;
  Transform transform = Transform::Log;
  Index full_index = 0;
};

/// Maps a flat vector of free, unconstrained values onto positions of the
/// full hyperparameter vector. Entries outside the schema stay pinned at
/// the values of the template they are unpacked into.
struct ParameterSchema {
  std::vector<ParameterEntry> entries;
  Index full_size = 0;

  Index size() const { return static_cast<Index>(entries.size()); }

  Vector pack(const Vector &full) const {
    require_shape(full.size() == full_size, "pack: full vector size mismatch");
    Vector v(size());
    for (Index i = 0; i < size(); ++i) {
      v(i) = full(entries[static_cast<std::size_t>(i)].full_index);
    }
    return v;
  }

  Vector unpack(const Vector &packed, Vector full) const {
    require_shape(packed.size() == size(), "unpack: packed vector size mismatch");
    require_shape(full.size() == full_size, "unpack: full vector size mismatch");
    for (Index i = 0; i < size(); ++i) {
      full(entries[static_cast<std::size_t>(i)].full_index) = packed(i);
    }
    return full;
  }

  /// Restricts a full gradient to the free coordinates.
  Vector select(const Vector &full_gradient) const { return pack(full_gradient); }
};

// Single-task layout: log lengthscales, log signal variance, log noise,
// constant mean.

inline Vector flatten(const GPParameters &p) {
  const Index dim = p.kernel.input_dim();
  Vector v(dim + 3);
  v.head(dim) = p.kernel.log_lengthscales;
  v(dim) = p.kernel.log_signal_variance;
  v(dim + 1) = p.log_noise_variance;
  v(dim + 2) = p.mean;
  return v;
}

inline GPParameters unflatten(const Vector &v, GPParameters tmpl) {
  const Index dim = tmpl.kernel.input_dim();
  require_shape(v.size() == dim + 3, "unflatten: GP parameter size mismatch");
  tmpl.kernel.log_lengthscales = v.head(dim);
  tmpl.kernel.log_signal_variance = v(dim);
  tmpl.log_noise_variance = v(dim + 1);
  tmpl.mean = v(dim + 2);
  return tmpl;
}

inline ParameterSchema gp_schema(Index input_dim, bool learn_mean = false) {
  ParameterSchema s;
  for (Index p = 0; p < input_dim; ++p) {
    s.entries.push_back({"log_lengthscale[" + std::to_string(p) + "]",
                         Transform::Log, p});
  }
  s.entries.push_back({"log_signal_variance", Transform::Log, input_dim});
  s.entries.push_back({"log_noise_variance", Transform::Log, input_dim + 1});
  if (learn_mean) {
    s.entries.push_back({"mean", Transform::Identity, input_dim + 2});
  }
  s.full_size = input_dim + 3;
  return s;
}

// Multi-task layout follows GradientLayout.

inline Vector flatten(const MTGPParameters &p) {
  const auto layout = GradientLayout::of(p.kernel);
  Vector v(layout.size);
  for (std::size_t q = 0; q < p.kernel.terms.size(); ++q) {
    const auto &t = p.kernel.terms[q];
    const auto &s = layout.terms[q];
    v.segment(s.log_lengthscales, t.base_kernel.input_dim()) =
        t.base_kernel.log_lengthscales;
    v(s.log_signal_variance) = t.base_kernel.log_signal_variance;
    for (Index r = 0; r < t.loadings.rows(); ++r) {
      for (Index c = 0; c < t.loadings.cols(); ++c) {
        v(s.loadings + r * t.loadings.cols() + c) = t.loadings(r, c);
      }
    }
    v.segment(s.log_gamma, p.kernel.num_tasks) = t.log_gamma;
  }
  v.segment(layout.log_noise, p.kernel.num_tasks) = p.log_noise_variances;
  v.segment(layout.mean, p.kernel.num_tasks) =
      p.prior_mean.size() == 0 ? Vector::Zero(p.kernel.num_tasks) : p.prior_mean;
  return v;
}

inline MTGPParameters unflatten(const Vector &v, MTGPParameters tmpl) {
  const auto layout = GradientLayout::of(tmpl.kernel);
  require_shape(v.size() == layout.size,
                "unflatten: multi-task parameter size mismatch");
  for (std::size_t q = 0; q < tmpl.kernel.terms.size(); ++q) {
    auto &t = tmpl.kernel.terms[q];
    const auto &s = layout.terms[q];
    t.base_kernel.log_lengthscales =
        v.segment(s.log_lengthscales, t.base_kernel.input_dim());
    t.base_kernel.log_signal_variance = v(s.log_signal_variance);
    for (Index r = 0; r < t.loadings.rows(); ++r) {
      for (Index c = 0; c < t.loadings.cols(); ++c) {
        t.loadings(r, c) = v(s.loadings + r * t.loadings.cols() + c);
      }
    }
    t.log_gamma = v.segment(s.log_gamma, tmpl.kernel.num_tasks);
  }
  tmpl.log_noise_variances = v.segment(layout.log_noise, tmpl.kernel.num_tasks);
  tmpl.prior_mean = v.segment(layout.mean, tmpl.kernel.num_tasks);
  return tmpl;
}

/// Which multi-task hyperparameters are free during optimization.
struct MTGPSchemaOptions {
  bool learn_signal_variance = false; // redundant with the scale of W
  bool learn_gamma = false;           // false pins γ (SLFM: γ ≡ 0)
  bool learn_mean = false;            // constant prior mean per task
  /// Optional per-term mask of free W entries (same shape as W). Empty
  /// means every entry is free.
  std::vector<Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>> loading_mask;
};

inline ParameterSchema mtgp_schema(const MultiTaskKernelSpec &spec,
                                   const MTGPSchemaOptions &opts = {}) {
  const auto layout = GradientLayout::of(spec);
  ParameterSchema s;
  s.full_size = layout.size;
  for (std::size_t q = 0; q < spec.terms.size(); ++q) {
    const auto &t = spec.terms[q];
    const auto &slot = layout.terms[q];
    const std::string prefix = "term[" + std::to_string(q) + "].";
    for (Index p = 0; p < t.base_kernel.input_dim(); ++p) {
      s.entries.push_back({prefix + "log_lengthscale[" + std::to_string(p) + "]",
                           Transform::Log, slot.log_lengthscales + p});
    }
    if (opts.learn_signal_variance) {
      s.entries.push_back(
          {prefix + "log_signal_variance", Transform::Log, slot.log_signal_variance});
    }
    for (Index r = 0; r < t.loadings.rows(); ++r) {
      for (Index c = 0; c < t.loadings.cols(); ++c) {
        if (!opts.loading_mask.empty() && !opts.loading_mask.at(q)(r, c)) {
          continue;
        }
        s.entries.push_back({prefix + "W[" + std::to_string(r) + "," +
                                 std::to_string(c) + "]",
                             Transform::Identity,
                             slot.loadings + r * t.loadings.cols() + c});
      }
    }
    if (opts.learn_gamma) {
      for (Index d = 0; d < spec.num_tasks; ++d) {
        s.entries.push_back({prefix + "log_gamma[" + std::to_string(d) + "]",
                             Transform::Log, slot.log_gamma + d});
      }
    }
  }
  for (Index d = 0; d < spec.num_tasks; ++d) {
    s.entries.push_back({"log_noise_variance[" + std::to_string(d) + "]",
                         Transform::Log, layout.log_noise + d});
  }
  if (opts.learn_mean) {
    for (Index d = 0; d < spec.num_tasks; ++d) {
      s.entries.push_back({"mean[" + std::to_string(d) + "]", Transform::Identity,
                           layout.mean + d});
    }
  }
  return s;
}

} // namespace mtgp
