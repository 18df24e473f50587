#pragma once

#include "mtgp/common.hpp"
#include "mtgp/dataset.hpp"
#include "mtgp/kernel.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace mtgp {

/// One latent component of a linear model of coregionalization:
/// B = W Wᵀ + diag(γ) paired with an input-space kernel.
///
/// γ is stored as log γ; a task-specific variance of exactly zero is
/// represented by -inf.
struct CoregionalizationTerm {
  Matrix loadings;  // D×R
  Vector log_gamma; // D
  ScalarKernelSpec base_kernel;

  static CoregionalizationTerm make(const Matrix &w, const Vector &gamma,
                                    ScalarKernelSpec kernel) {
    require_shape(w.rows() == gamma.size(),
                  "coregionalization term: W rows and gamma length differ");
    if ((gamma.array() < 0.0).any()) {
      throw DomainError("coregionalization term: gamma must be non-negative");
    }
    return {w, gamma.array().log().matrix(), std::move(kernel)};
  }

  /// Rank-one term B = w wᵀ.
  static CoregionalizationTerm rank_one(const Vector &w,
                                        ScalarKernelSpec kernel) {
    return make(w, Vector::Zero(w.size()), std::move(kernel));
  }

  Index num_tasks() const { return loadings.rows(); }
  Index rank() const { return loadings.cols(); }
  Vector gamma() const { return log_gamma.array().exp(); }
  bool has_gamma() const { return (log_gamma.array() > -std::numeric_limits<double>::infinity()).any(); }
};

struct MultiTaskKernelSpec {
  Index num_tasks = 1;
  std::vector<CoregionalizationTerm> terms;

  Index input_dim() const {
    return terms.empty() ? 0 : terms.front().base_kernel.input_dim();
  }

  /// True when every term is rank one with γ ≡ 0.
  bool is_slfm() const {
    for (const auto &t : terms) {
      if (t.rank() != 1 || t.has_gamma()) {
        return false;
      }
    }
    return true;
  }

  void validate() const {
    require_shape(num_tasks >= 1, "multi-task kernel: need at least one task");
    require_shape(!terms.empty(), "multi-task kernel: need at least one term");
    for (const auto &t : terms) {
      require_shape(t.loadings.rows() == num_tasks &&
                        t.log_gamma.size() == num_tasks,
                    "multi-task kernel: term task count differs from D");
      require_shape(t.base_kernel.input_dim() == input_dim(),
                    "multi-task kernel: terms disagree on input dimension");
    }
  }
};

inline Matrix build_B(const CoregionalizationTerm &term) {
  require_shape(term.loadings.rows() == term.log_gamma.size(),
                "build_B: W rows and gamma length differ");
  Matrix b = term.loadings * term.loadings.transpose();
  b.diagonal() += term.gamma();
  // W Wᵀ is symmetric in exact arithmetic; make it so bitwise.
  return 0.5 * (b + b.transpose());
}

/// Covariance between task `d` at rows of `xd` and task `d2` at rows of `xd2`.
inline Matrix cross_covariance_block(const MultiTaskKernelSpec &spec, Index d,
                                     Index d2, const Matrix &xd,
                                     const Matrix &xd2) {
  require_shape(d >= 0 && d < spec.num_tasks && d2 >= 0 && d2 < spec.num_tasks,
                "cross_covariance_block: task index out of range");
  Matrix out = Matrix::Zero(xd.rows(), xd2.rows());
  for (const auto &term : spec.terms) {
    const double coupling = build_B(term)(d, d2);
    if (coupling != 0.0) {
      out += coupling * kernel_matrix(term.base_kernel, xd, xd2);
    }
  }
  return out;
}

/// Joint prior covariance over all observations, task-major order.
inline Matrix assemble_joint_covariance(const MultiTaskKernelSpec &spec,
                                        const MultiTaskDataset &data) {
  spec.validate();
  require_shape(data.num_tasks() == spec.num_tasks,
                "assemble_joint_covariance: dataset task count differs from D");
  require_shape(data.input_dim() == spec.input_dim(),
                "assemble_joint_covariance: input dimension mismatch");
  const Matrix x = data.stacked_inputs();
  const auto labels = data.task_labels();
  const Index n = x.rows();
  Matrix k = Matrix::Zero(n, n);
  for (const auto &term : spec.terms) {
    const Matrix b = build_B(term);
    const Matrix kq = kernel_matrix(term.base_kernel, x);
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < n; ++i) {
        k(i, j) += b(labels[static_cast<std::size_t>(i)],
                     labels[static_cast<std::size_t>(j)]) *
                   kq(i, j);
      }
    }
  }
  return k;
}

} // namespace mtgp
