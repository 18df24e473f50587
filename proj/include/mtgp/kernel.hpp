#pragma once

#include "mtgp/common.hpp"

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

namespace mtgp {

enum class KernelKind { SquaredExponential, Matern52 };

inline std::string_view to_string(KernelKind kind) {
  return kind == KernelKind::SquaredExponential ? "se" : "matern52";
}

inline KernelKind kernel_kind_from_string(std::string_view name) {
  if (name == "se" || name == "squared_exponential") {
    return KernelKind::SquaredExponential;
  }
  if (name == "matern52") {
    return KernelKind::Matern52;
  }
  throw ValidationError("unknown kernel kind '" + std::string(name) + "'");
}

/// Stationary anisotropic kernel. Hyperparameters are held in log space so
/// that optimizer parameter vectors map onto them without rounding.
struct ScalarKernelSpec {
  KernelKind kind = KernelKind::SquaredExponential;
  Vector log_lengthscales;
  double log_signal_variance = 0.0;

  static ScalarKernelSpec make(KernelKind kind, const Vector &lengthscales,
                               double signal_variance) {
    if ((lengthscales.array() <= 0.0).any() || !(signal_variance > 0.0)) {
      throw DomainError("kernel hyperparameters must be strictly positive");
    }
    return {kind, lengthscales.array().log().matrix(),
            std::log(signal_variance)};
  }

  static ScalarKernelSpec isotropic(KernelKind kind, Index dim,
                                    double lengthscale,
                                    double signal_variance) {
    return make(kind, Vector::Constant(dim, lengthscale), signal_variance);
  }

  Index input_dim() const { return log_lengthscales.size(); }
  Vector lengthscales() const { return log_lengthscales.array().exp(); }
  double signal_variance() const { return std::exp(log_signal_variance); }

  /// Number of log-hyperparameters: one per lengthscale plus the variance.
  Index num_params() const { return input_dim() + 1; }
};

namespace detail {

template <typename A, typename B>
double scaled_sq_dist(const A &x, const B &x2, const Vector &inv_ls) {
  double r2 = 0.0;
  for (Index p = 0; p < inv_ls.size(); ++p) {
    const double s = (x(p) - x2(p)) * inv_ls(p);
    r2 += s * s;
  }
  return r2;
}

constexpr double kSqrt5 = 2.23606797749978969640917366873127623544;

/// Kernel value as a function of the scaled squared distance r².
inline double kernel_from_r2(KernelKind kind, double sf2, double r2) {
  if (kind == KernelKind::SquaredExponential) {
    return sf2 * std::exp(-0.5 * r2);
  }
  const double r = std::sqrt(r2);
  return sf2 * (1.0 + kSqrt5 * r + 5.0 / 3.0 * r2) * std::exp(-kSqrt5 * r);
}

/// -dk/d(r²) * 2, i.e. the factor multiplying s_p = ((x_p - x2_p)/l_p)² in
/// dk/dlog(l_p).
inline double lengthscale_factor(KernelKind kind, double sf2, double r2) {
  if (kind == KernelKind::SquaredExponential) {
    return sf2 * std::exp(-0.5 * r2);
  }
  const double r = std::sqrt(r2);
  return sf2 * 5.0 / 3.0 * (1.0 + kSqrt5 * r) * std::exp(-kSqrt5 * r);
}

} // namespace detail

template <typename A, typename B>
double kernel_eval(const ScalarKernelSpec &spec, const Eigen::MatrixBase<A> &x,
                   const Eigen::MatrixBase<B> &x2) {
  require_shape(x.size() == spec.input_dim() && x2.size() == spec.input_dim(),
                "kernel_eval: input dimension does not match lengthscales");
  const Vector inv_ls = (-spec.log_lengthscales.array()).exp();
  const double r2 = detail::scaled_sq_dist(x.derived(), x2.derived(), inv_ls);
  return detail::kernel_from_r2(spec.kind, spec.signal_variance(), r2);
}

inline double kernel_eval(const ScalarKernelSpec &spec, double x, double x2) {
  Vector a(1), b(1);
  a << x;
  b << x2;
  return kernel_eval(spec, a, b);
}

/// Gram matrix between the rows of `x` and the rows of `x2`.
inline Matrix kernel_matrix(const ScalarKernelSpec &spec, const Matrix &x,
                            const Matrix &x2) {
  require_shape(x.cols() == spec.input_dim() && x2.cols() == spec.input_dim(),
                "kernel_matrix: column count does not match lengthscales");
  const Vector inv_ls = (-spec.log_lengthscales.array()).exp();
  const double sf2 = spec.signal_variance();
  Matrix k(x.rows(), x2.rows());
  for (Index j = 0; j < x2.rows(); ++j) {
    for (Index i = 0; i < x.rows(); ++i) {
      const double r2 = detail::scaled_sq_dist(x.row(i), x2.row(j), inv_ls);
      k(i, j) = detail::kernel_from_r2(spec.kind, sf2, r2);
    }
  }
  return k;
}

inline Matrix kernel_matrix(const ScalarKernelSpec &spec, const Matrix &x) {
  return kernel_matrix(spec, x, x);
}

/// dK/dθ for θ = (log l_1, ..., log l_P, log σ_f²), in that order.
inline std::vector<Matrix> kernel_matrix_grad(const ScalarKernelSpec &spec,
                                              const Matrix &x) {
  require_shape(x.rows() > 0, "kernel_matrix_grad: X must be nonempty");
  require_shape(x.cols() == spec.input_dim(),
                "kernel_matrix_grad: column count does not match lengthscales");
  const Index n = x.rows();
  const Index dim = spec.input_dim();
  const Vector inv_ls = (-spec.log_lengthscales.array()).exp();
  const double sf2 = spec.signal_variance();

  std::vector<Matrix> grads(static_cast<std::size_t>(dim + 1),
                            Matrix::Zero(n, n));
  Matrix &dsf2 = grads.back();
  for (Index j = 0; j < n; ++j) {
    for (Index i = j; i < n; ++i) {
      const Eigen::ArrayXd diff =
          ((x.row(i) - x.row(j)).transpose().array() * inv_ls.array())
              .square();
      const double r2 = diff.sum();
      const double k = detail::kernel_from_r2(spec.kind, sf2, r2);
      dsf2(i, j) = dsf2(j, i) = k;
      const double f = detail::lengthscale_factor(spec.kind, sf2, r2);
      for (Index p = 0; p < dim; ++p) {
        const double g = f * diff(p);
        grads[static_cast<std::size_t>(p)](i, j) = g;
        grads[static_cast<std::size_t>(p)](j, i) = g;
      }
    }
  }
  return grads;
}

} // namespace mtgp
