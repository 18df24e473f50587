#pragma once

#include "mtgp/common.hpp"
#include "mtgp/coregionalization.hpp"
#include "mtgp/dataset.hpp"
#include "mtgp/gp.hpp"
#include "mtgp/linalg.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace mtgp {

/// Per-task affine map between native target units and the standardized
/// scale the model is fitted on: y_std = (y - mean) / scale.
struct Standardization {
  Vector mean;
  Vector scale;

  static Standardization identity(Index num_tasks) {
    return {Vector::Zero(num_tasks), Vector::Ones(num_tasks)};
  }

  /// Training-target statistics per task. Tasks with fewer than two
  /// observations or zero spread keep unit scale.
  static Standardization from_data(const MultiTaskDataset &data) {
    Standardization s = identity(data.num_tasks());
    for (Index d = 0; d < data.num_tasks(); ++d) {
      const Vector &y = data.task(d).targets;
      if (y.size() == 0) {
        continue;
      }
      s.mean(d) = y.mean();
      if (y.size() >= 2) {
        const double var = (y.array() - s.mean(d)).square().sum() /
                           static_cast<double>(y.size() - 1);
        if (var > 0.0) {
          s.scale(d) = std::sqrt(var);
        }
      }
    }
    return s;
  }

  MultiTaskDataset apply(const MultiTaskDataset &data) const {
    std::vector<TaskData> tasks = data.tasks();
    for (std::size_t d = 0; d < tasks.size(); ++d) {
      const auto i = static_cast<Index>(d);
      tasks[d].targets =
          ((tasks[d].targets.array() - mean(i)) / scale(i)).matrix();
    }
    return MultiTaskDataset(std::move(tasks));
  }
};

struct MTGPFitOptions {
  bool standardize = true;
  /// Constant prior mean per task on the standardized scale; empty means
  /// zero for every task.
  Vector prior_mean;
  FactorOptions factor;
};

/// A fitted multi-task GP. Hyperparameters live on the standardized scale.
struct MTGPModel {
  MultiTaskKernelSpec kernel;
  Vector noise_variances;
  Vector prior_mean; // per task, standardized scale
  Standardization standardization;

  MultiTaskDataset data; // standardized targets
  std::vector<Index> labels;
  Matrix stacked_inputs;
  JitteredCholesky factor;
  Vector weights;

  Index num_tasks() const { return kernel.num_tasks; }
};

namespace detail {

inline Vector effective_noises(const Vector &noise_variances) {
  Vector out(noise_variances.size());
  for (Index d = 0; d < noise_variances.size(); ++d) {
    out(d) = effective_noise(noise_variances(d));
  }
  return out;
}

} // namespace detail

/// Standardized stacked targets minus the per-task prior mean.
inline Vector mtgp_centered_targets(const MTGPModel &model) {
  Vector y = model.data.stacked_targets();
  for (Index i = 0; i < y.size(); ++i) {
    y(i) -= model.prior_mean(model.labels[static_cast<std::size_t>(i)]);
  }
  return y;
}

inline MTGPModel mtgp_fit(const MultiTaskKernelSpec &kernel,
                          const Vector &noise_variances,
                          const MultiTaskDataset &dataset,
                          const MTGPFitOptions &opts = {}) {
  kernel.validate();
  require_shape(dataset.num_tasks() == kernel.num_tasks,
                "mtgp_fit: dataset task count differs from kernel");
  require_shape(noise_variances.size() == kernel.num_tasks,
                "mtgp_fit: one noise variance per task required");

  MTGPModel model;
  model.kernel = kernel;
  model.noise_variances = detail::effective_noises(noise_variances);
  model.prior_mean = opts.prior_mean.size() == 0
                         ? Vector::Zero(kernel.num_tasks)
                         : opts.prior_mean;
  require_shape(model.prior_mean.size() == kernel.num_tasks,
                "mtgp_fit: one prior mean per task required");
  model.standardization = opts.standardize
                              ? Standardization::from_data(dataset)
                              : Standardization::identity(kernel.num_tasks);
  model.data = model.standardization.apply(dataset);
  model.labels = model.data.task_labels();
  model.stacked_inputs = model.data.stacked_inputs();

  Matrix k = assemble_joint_covariance(kernel, model.data);
  for (Index i = 0; i < k.rows(); ++i) {
    k(i, i) += model.noise_variances(model.labels[static_cast<std::size_t>(i)]);
  }
  FactorOptions fo = opts.factor;
  if ((model.noise_variances.array() == 0.0).all()) {
    fo.initial_jitter = 0.0;
  }
  model.factor = cholesky_with_jitter(k, fo);
  model.weights = model.factor.solve(mtgp_centered_targets(model));
  return model;
}

/// Cross-covariance between task `task` at `xstar` and every stacked
/// training observation (M×Ntot).
inline Matrix mtgp_cross_covariance(const MTGPModel &model, Index task,
                                    const Matrix &xstar) {
  const Index n = model.stacked_inputs.rows();
  Matrix out = Matrix::Zero(xstar.rows(), n);
  for (const auto &term : model.kernel.terms) {
    const Matrix b = build_B(term);
    const Matrix kq = kernel_matrix(term.base_kernel, xstar, model.stacked_inputs);
    for (Index j = 0; j < n; ++j) {
      out.col(j) += b(task, model.labels[static_cast<std::size_t>(j)]) * kq.col(j);
    }
  }
  return out;
}

inline PosteriorPrediction mtgp_predict(const MTGPModel &model, Index task,
                                        const Matrix &xstar,
                                        bool full_covariance = false) {
  require_shape(task >= 0 && task < model.num_tasks(),
                "mtgp_predict: task index out of range");
  require_shape(xstar.cols() == model.kernel.input_dim(),
                "mtgp_predict: query dimension does not match model");
  const Matrix ks = mtgp_cross_covariance(model, task, xstar);
  const Matrix v = model.factor.llt.matrixL().solve(ks.transpose()); // Ntot×M

  double prior_var = 0.0;
  for (const auto &term : model.kernel.terms) {
    prior_var += build_B(term)(task, task) * term.base_kernel.signal_variance();
  }

  const double mu = model.standardization.mean(task);
  const double sc = model.standardization.scale(task);
  PosteriorPrediction out;
  out.mean =
      (((ks * model.weights).array() + model.prior_mean(task)) * sc + mu).matrix();
  out.variance = ((prior_var - v.colwise().squaredNorm().transpose().array())
                      .cwiseMax(0.0) *
                  (sc * sc))
                     .matrix();
  if (full_covariance) {
    Matrix cov = cross_covariance_block(model.kernel, task, task, xstar, xstar) -
                 v.transpose() * v;
    cov *= sc * sc;
    cov.diagonal() = out.variance;
    out.covariance = std::move(cov);
  }
  return out;
}

/// Position of each hyperparameter in the full gradient vector returned by
/// mtgp_log_marginal_likelihood. Per term q, in order: log lengthscales,
/// log signal variance, W entries (row-major), log gamma. Then log noise
/// per task, then the constant prior mean per task.
struct GradientLayout {
  struct TermSlots {
    Index log_lengthscales = 0;
    Index log_signal_variance = 0;
    Index loadings = 0;
    Index log_gamma = 0;
  };
  std::vector<TermSlots> terms;
  Index log_noise = 0;
  Index mean = 0;
  Index size = 0;

  static GradientLayout of(const MultiTaskKernelSpec &spec) {
    GradientLayout g;
    Index pos = 0;
    for (const auto &t : spec.terms) {
      TermSlots s;
      s.log_lengthscales = pos;
      pos += t.base_kernel.input_dim();
      s.log_signal_variance = pos++;
      s.loadings = pos;
      pos += t.loadings.size();
      s.log_gamma = pos;
      pos += spec.num_tasks;
      g.terms.push_back(s);
    }
    g.log_noise = pos;
    pos += spec.num_tasks;
    g.mean = pos;
    pos += spec.num_tasks;
    g.size = pos;
    return g;
  }
};

inline LikelihoodResult
mtgp_log_marginal_likelihood(const MultiTaskKernelSpec &kernel,
                             const Vector &noise_variances,
                             const MultiTaskDataset &dataset,
                             const MTGPFitOptions &opts = {}) {
  const MTGPModel model = mtgp_fit(kernel, noise_variances, dataset, opts);
  const Vector y = mtgp_centered_targets(model);
  const Index n = y.size();
  const auto &labels = model.labels;
  const Index num_tasks = kernel.num_tasks;

  LikelihoodResult out;
  out.value = -0.5 * y.dot(model.weights) - 0.5 * model.factor.log_determinant() -
              0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

  const Matrix a = model.weights * model.weights.transpose() -
                   model.factor.inverse();
  const auto layout = GradientLayout::of(kernel);
  out.gradient = Vector::Zero(layout.size);
  // Σ_i dK_ii/dθ per parameter: the jitter is relative_jitter × mean
  // diagonal, so it contributes ½ tr(A) d(jitter)/dθ to the gradient.
  Vector diag_sum = Vector::Zero(layout.size);

  for (std::size_t q = 0; q < kernel.terms.size(); ++q) {
    const auto &term = kernel.terms[q];
    const auto &slot = layout.terms[q];
    const Matrix b = build_B(term);
    const auto dk = kernel_matrix_grad(term.base_kernel, model.stacked_inputs);
    const Matrix &kq = dk.back(); // dK/dlog σ_f² equals K itself

    // Task-pair aggregation M[t,s] = Σ_{i∈t, j∈s} A_ij Kq_ij.
    Matrix m = Matrix::Zero(num_tasks, num_tasks);
    Matrix a_b(n, n); // A_ij B[t_i, t_j]
    for (Index j = 0; j < n; ++j) {
      const Index tj = labels[static_cast<std::size_t>(j)];
      for (Index i = 0; i < n; ++i) {
        const Index ti = labels[static_cast<std::size_t>(i)];
        m(ti, tj) += a(i, j) * kq(i, j);
        a_b(i, j) = a(i, j) * b(ti, tj);
      }
    }

    for (Index p = 0; p < term.base_kernel.input_dim(); ++p) {
      out.gradient(slot.log_lengthscales + p) =
          0.5 * a_b.cwiseProduct(dk[static_cast<std::size_t>(p)]).sum();
    }
    out.gradient(slot.log_signal_variance) = 0.5 * b.cwiseProduct(m).sum();

    const Matrix dw = m * term.loadings;
    for (Index r = 0; r < term.loadings.rows(); ++r) {
      for (Index c = 0; c < term.loadings.cols(); ++c) {
        out.gradient(slot.loadings + r * term.loadings.cols() + c) = dw(r, c);
      }
    }
    const Vector gamma = term.gamma();
    for (Index d = 0; d < num_tasks; ++d) {
      out.gradient(slot.log_gamma + d) = 0.5 * gamma(d) * m(d, d);
    }

    // Diagonal derivatives; lengthscales leave k(x, x) unchanged.
    Vector kq_task = Vector::Zero(num_tasks); // Σ_{i∈d} Kq_ii
    for (Index i = 0; i < n; ++i) {
      kq_task(labels[static_cast<std::size_t>(i)]) += kq(i, i);
    }
    diag_sum(slot.log_signal_variance) = b.diagonal().dot(kq_task);
    for (Index r = 0; r < term.loadings.rows(); ++r) {
      for (Index c = 0; c < term.loadings.cols(); ++c) {
        diag_sum(slot.loadings + r * term.loadings.cols() + c) =
            2.0 * term.loadings(r, c) * kq_task(r);
      }
    }
    for (Index d = 0; d < num_tasks; ++d) {
      diag_sum(slot.log_gamma + d) = gamma(d) * kq_task(d);
    }
  }

  for (Index i = 0; i < n; ++i) {
    const Index d = labels[static_cast<std::size_t>(i)];
    if (noise_variances(d) >= kNoiseFloor) {
      out.gradient(layout.log_noise + d) +=
          0.5 * model.noise_variances(d) * a(i, i);
      diag_sum(layout.log_noise + d) += model.noise_variances(d);
    }
    out.gradient(layout.mean + d) += model.weights(i);
  }
  out.gradient += (0.5 * a.trace() * model.factor.relative_jitter /
                   static_cast<double>(n)) * diag_sum;
  return out;
}

} // namespace mtgp
