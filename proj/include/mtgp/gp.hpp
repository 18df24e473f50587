#pragma once

#include "mtgp/common.hpp"
#include "mtgp/kernel.hpp"
#include "mtgp/linalg.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

namespace mtgp {

/// Noise variances below this are raised to it before factorization.
/// Exactly zero is kept and requests noise-free conditioning.
inline constexpr double kNoiseFloor = 1e-10;

inline double effective_noise(double noise_variance) {
  if (noise_variance < 0.0 || std::isnan(noise_variance)) {
    throw DomainError("noise variance must be non-negative");
  }
  return noise_variance == 0.0 ? 0.0 : std::max(noise_variance, kNoiseFloor);
}

/// Noise-free conditioning gets no jitter and no escalation.
inline FactorOptions factor_options_for_noise(double noise_variance,
                                              FactorOptions opts) {
  if (noise_variance == 0.0) {
    opts.initial_jitter = 0.0;
  }
  return opts;
}

struct PosteriorPrediction {
  Vector mean;
  Vector variance;
  std::optional<Matrix> covariance;
};

/// A fitted single-task GP. Immutable after construction by gp_fit.
struct GPModel {
  ScalarKernelSpec kernel;
  double noise_variance = 0.0;
  double mean_function = 0.0;

  Matrix inputs;
  Vector targets;
  JitteredCholesky factor;
  Vector weights;

  Index size() const { return inputs.rows(); }
};

inline GPModel gp_fit(const ScalarKernelSpec &kernel, double noise_variance,
                      const Matrix &x, const Vector &y, double mean_function = 0.0,
                      const FactorOptions &opts = {}) {
  require_shape(x.rows() >= 1, "gp_fit: need at least one training point");
  require_shape(x.rows() == y.size(), "gp_fit: X rows and Y length differ");
  require_shape(x.cols() == kernel.input_dim(),
                "gp_fit: input dimension does not match kernel");
  require_shape(y.allFinite(), "gp_fit: targets must be finite");
  const double noise = effective_noise(noise_variance);

  GPModel model{kernel, noise, mean_function, x, y, {}, {}};
  Matrix k = kernel_matrix(kernel, x);
  k.diagonal().array() += noise;
  model.factor = cholesky_with_jitter(k, factor_options_for_noise(noise, opts));
  model.weights = model.factor.solve(
      (y.array() - mean_function).matrix().eval());
  return model;
}

inline PosteriorPrediction gp_predict(const GPModel &model, const Matrix &xstar,
                                      bool full_covariance = false) {
  require_shape(xstar.cols() == model.kernel.input_dim(),
                "gp_predict: query dimension does not match model");
  const Matrix kxs = kernel_matrix(model.kernel, model.inputs, xstar); // N×M
  PosteriorPrediction out;
  out.mean = (kxs.transpose() * model.weights).array() + model.mean_function;

  const Matrix v = model.factor.llt.matrixL().solve(kxs);
  const double sf2 = model.kernel.signal_variance();
  out.variance =
      (sf2 - v.colwise().squaredNorm().transpose().array()).cwiseMax(0.0);
  if (full_covariance) {
    Matrix cov = kernel_matrix(model.kernel, xstar) - v.transpose() * v;
    cov.diagonal() = out.variance;
    out.covariance = std::move(cov);
  }
  return out;
}

struct LikelihoodResult {
  double value = 0.0;
  Vector gradient;
};

/// Log marginal likelihood and its gradient with respect to
/// (log l_1..log l_P, log σ_f², log σ², constant mean).
inline LikelihoodResult
gp_log_marginal_likelihood(const ScalarKernelSpec &kernel, double noise_variance,
                           const Matrix &x, const Vector &y,
                           double mean_function = 0.0,
                           const FactorOptions &opts = {}) {
  const GPModel model = gp_fit(kernel, noise_variance, x, y, mean_function, opts);
  const Index n = x.rows();
  const Vector r = y.array() - mean_function;

  LikelihoodResult out;
  out.value = -0.5 * r.dot(model.weights) - 0.5 * model.factor.log_determinant() -
              0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

  // dL/dθ = ½ tr((α αᵀ - K⁻¹) dK/dθ)
  const Matrix a = model.weights * model.weights.transpose() -
                   model.factor.inverse();
  const auto grads = kernel_matrix_grad(kernel, x);
  // The jitter is relative_jitter × mean diagonal, so each parameter also
  // moves it; its share of the gradient is ½ tr(A) d(jitter)/dθ.
  const double jitter_weight = 0.5 * a.trace() * model.factor.relative_jitter;
  out.gradient.resize(kernel.num_params() + 2);
  for (std::size_t j = 0; j < grads.size(); ++j) {
    out.gradient(static_cast<Index>(j)) =
        0.5 * a.cwiseProduct(grads[j]).sum() +
        jitter_weight * grads[j].diagonal().mean();
  }
  // The noise floor is a constant below it.
  const bool floored = noise_variance < kNoiseFloor;
  out.gradient(kernel.num_params()) =
      floored ? 0.0
              : (0.5 * a.trace() + jitter_weight) * model.noise_variance;
  out.gradient(kernel.num_params() + 1) = model.weights.sum();
  return out;
}

} // namespace mtgp
