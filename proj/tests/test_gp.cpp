#include "mtgp/gp.hpp"
#include "mtgp/optim.hpp"
#include "mtgp/parameters.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace mtgp;

namespace {

ScalarKernelSpec random_kernel(std::mt19937_64 &rng, Index dim,
                               KernelKind kind = KernelKind::SquaredExponential) {
  return ScalarKernelSpec::make(kind, oracle::uniform_vector(rng, dim, 0.2, 1.0),
                                oracle::uniform_vector(rng, 1, 0.5, 2.0)(0));
}

double oracle_kernel(const ScalarKernelSpec &k, const Matrix &a, Index i, const Matrix &b,
                     Index j) {
  const Vector x = a.row(i).transpose();
  const Vector y = b.row(j).transpose();
  return k.kind == KernelKind::SquaredExponential
             ? oracle::se(x, y, k.lengthscales(), k.signal_variance())
             : oracle::matern52(x, y, k.lengthscales(), k.signal_variance());
}

/// Dense joint-Gaussian conditioning with the same diagonal the model
/// factorized: noise plus whatever jitter the factorization reports.
oracle::Conditioned dense_posterior(const GPModel &m, const Matrix &xs) {
  const Index n = m.inputs.rows();
  Matrix kyy(n, n), kys(n, xs.rows()), kss(xs.rows(), xs.rows());
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      kyy(i, j) = oracle_kernel(m.kernel, m.inputs, i, m.inputs, j);
    }
    kyy(i, i) += m.noise_variance + m.factor.jitter;
    for (Index j = 0; j < xs.rows(); ++j) {
      kys(i, j) = oracle_kernel(m.kernel, m.inputs, i, xs, j);
    }
  }
  for (Index i = 0; i < xs.rows(); ++i) {
    for (Index j = 0; j < xs.rows(); ++j) {
      kss(i, j) = oracle_kernel(m.kernel, xs, i, xs, j);
    }
  }
  return oracle::condition(kyy, kys, kss, m.targets, Vector::Constant(n, m.mean_function),
                           Vector::Constant(xs.rows(), m.mean_function));
}

Matrix col(std::initializer_list<double> v) {
  Matrix m(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) {
    m(i++, 0) = x;
  }
  return m;
}

} // namespace

TEST(GPFit, SinglePointWeights) {
  const auto k = ScalarKernelSpec::isotropic(KernelKind::SquaredExponential, 1, 1.0, 1.0);
  Vector y(1);
  y << 2.0;
  const GPModel m = gp_fit(k, 1e-10, col({0.0}), y);
  EXPECT_NEAR(m.weights(0), 2.0 / (1.0 + 1e-10), 1e-7);
}

TEST(GPFit, DuplicateInputsWithoutNoiseAreIllConditioned) {
  const auto k = ScalarKernelSpec::isotropic(KernelKind::SquaredExponential, 1, 1.0, 1.0);
  EXPECT_THROW(gp_fit(k, 0.0, col({0.3, 0.3}), Vector::Ones(2)), IllConditionedError);
}

TEST(GPFit, FactorIsLowerTriangularWithPositiveDiagonal) {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 20; ++k) {
    const auto kern = random_kernel(rng, 2);
    const GPModel m = gp_fit(kern, 1e-3, oracle::uniform_matrix(rng, 6, 2),
                             oracle::uniform_vector(rng, 6, -1.0, 1.0));
    const Matrix l = m.factor.lower();
    EXPECT_EQ(Matrix(l.triangularView<Eigen::StrictlyUpper>()), Matrix::Zero(6, 6));
    EXPECT_GT(l.diagonal().minCoeff(), 0.0);
  }
}

TEST(GPFit, ShapeAndDomainErrors) {
  const auto k = ScalarKernelSpec::isotropic(KernelKind::SquaredExponential, 1, 1.0, 1.0);
  EXPECT_THROW(gp_fit(k, 0.1, col({0.1, 0.2}), Vector::Ones(3)), InputShapeError);
  EXPECT_THROW(gp_fit(k, 0.1, Matrix(0, 1), Vector(0)), InputShapeError);
  EXPECT_THROW(gp_fit(k, -0.1, col({0.1}), Vector::Ones(1)), DomainError);
  Vector bad(1);
  bad << std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(gp_fit(k, 0.1, col({0.1}), bad), InputShapeError);
}

TEST(GPPredict, InterpolatesNearNoiselessData) {
  const auto k = ScalarKernelSpec::isotropic(KernelKind::SquaredExponential, 1, 0.3, 1.0);
  const Matrix x = col({0.0, 0.4, 0.7, 1.0});
  Vector y(4);
  y << 0.5, -1.0, 0.25, 2.0;
  const auto p = gp_predict(gp_fit(k, 1e-10, x, y), x);
  EXPECT_LT(oracle::max_abs(p.mean - y), 1e-4);
  EXPECT_LT(p.variance.maxCoeff(), 1e-4);
}

TEST(GPPredict, RevertsToPriorFarFromData) {
  const auto k = ScalarKernelSpec::isotropic(KernelKind::SquaredExponential, 1, 0.2, 2.5);
  const auto m = gp_fit(k, 1e-4, col({0.0, 0.3}), Vector::Constant(2, 4.0), 1.5);
  const auto p = gp_predict(m, col({100.0}));
  EXPECT_NEAR(p.mean(0), 1.5, 1e-12);
  EXPECT_NEAR(p.variance(0), 2.5, 1e-12);
}

TEST(GPPredict, TwoPointOneQueryMatchesDenseConditioning) {
  const auto k = ScalarKernelSpec::isotropic(KernelKind::SquaredExponential, 1, 0.5, 1.3);
  Vector y(2);
  y << 0.7, -0.2;
  const auto m = gp_fit(k, 0.01, col({0.1, 0.6}), y);
  const Matrix xs = col({0.35});
  const auto p = gp_predict(m, xs, true);
  const auto want = dense_posterior(m, xs);
  EXPECT_NEAR(p.mean(0), want.mean(0), 1e-10);
  EXPECT_NEAR(p.variance(0), want.cov(0, 0), 1e-10);
}

TEST(GPPredict, RandomInstancesMatchDenseConditioning) {
  std::mt19937_64 rng(32);
  for (int k = 0; k < 50; ++k) {
    const Index dim = 1 + k % 2;
    const Index n = 1 + k % 6;
    const Index mq = 1 + k % 3;
    const auto kind = k % 4 == 3 ? KernelKind::Matern52 : KernelKind::SquaredExponential;
    const auto m = gp_fit(random_kernel(rng, dim, kind),
                          oracle::uniform_vector(rng, 1, 1e-3, 0.1)(0),
                          oracle::uniform_matrix(rng, n, dim),
                          oracle::uniform_vector(rng, n, -2.0, 2.0),
                          oracle::uniform_vector(rng, 1, -1.0, 1.0)(0));
    const Matrix xs = oracle::uniform_matrix(rng, mq, dim);
    const auto p = gp_predict(m, xs, true);
    const auto want = dense_posterior(m, xs);
    EXPECT_LT(oracle::max_abs(p.mean - want.mean), 1e-10);
    EXPECT_LT(oracle::max_abs(*p.covariance - want.cov), 1e-10);
    EXPECT_LT(oracle::max_abs(p.variance - want.cov.diagonal()), 1e-10);
  }
}

TEST(GPPredict, VarianceNonNegativeAndCovarianceSymmetric) {
  std::mt19937_64 rng(33);
  for (int k = 0; k < 20; ++k) {
    const Matrix x = oracle::uniform_matrix(rng, 6, 1);
    const auto m = gp_fit(random_kernel(rng, 1), 1e-10, x, oracle::uniform_vector(rng, 6, -1, 1));
    const auto p = gp_predict(m, x, true);
    EXPECT_GE(p.variance.minCoeff(), 0.0);
    EXPECT_LT(oracle::max_abs(*p.covariance - p.covariance->transpose()), 1e-12);
  }
}

TEST(GPPredict, AddingTrainingPointNeverIncreasesVariance) {
  std::mt19937_64 rng(34);
  for (int k = 0; k < 30; ++k) {
    const auto kern = random_kernel(rng, 1);
    const double noise = oracle::uniform_vector(rng, 1, 1e-4, 0.1)(0);
    const Matrix x = oracle::uniform_matrix(rng, 5, 1);
    const Vector y = oracle::uniform_vector(rng, 5, -1, 1);
    const Matrix xs = oracle::uniform_matrix(rng, 10, 1);
    const auto fewer = gp_predict(gp_fit(kern, noise, x.topRows(4), y.head(4)), xs);
    const auto more = gp_predict(gp_fit(kern, noise, x, y), xs);
    EXPECT_LE((more.variance - fewer.variance).maxCoeff(), 1e-8);
  }
}

TEST(GPPredict, QueryDimensionMismatchIsShapeError) {
  const auto k = ScalarKernelSpec::isotropic(KernelKind::SquaredExponential, 1, 1.0, 1.0);
  const auto m = gp_fit(k, 0.1, col({0.1}), Vector::Ones(1));
  EXPECT_THROW(gp_predict(m, Matrix::Zero(1, 2)), InputShapeError);
}

TEST(GPLikelihood, StandardNormalSinglePoint) {
  const auto k = ScalarKernelSpec::isotropic(KernelKind::SquaredExponential, 1, 1.0, 0.75);
  FactorOptions exact;
  exact.initial_jitter = 0.0;
  const double want = -0.5 * std::log(2.0 * std::numbers::pi);
  const auto r = gp_log_marginal_likelihood(k, 0.25, col({0.0}), Vector::Zero(1), 0.0, exact);
  EXPECT_NEAR(r.value, want, 1e-15);
  EXPECT_NEAR(want, -0.91894, 5e-6);
  // With the default relative jitter the value moves by only ~½·1e-8.
  EXPECT_NEAR(gp_log_marginal_likelihood(k, 0.25, col({0.0}), Vector::Zero(1)).value, want,
              1e-8);
}

TEST(GPLikelihood, ZeroTargetsLeaveOnlyTheDeterminant) {
  std::mt19937_64 rng(35);
  for (int k = 0; k < 10; ++k) {
    const auto kern = random_kernel(rng, 2);
    const Matrix x = oracle::uniform_matrix(rng, 5, 2);
    const double noise = 0.05;
    const auto r = gp_log_marginal_likelihood(kern, noise, x, Vector::Zero(5));
    const auto m = gp_fit(kern, noise, x, Vector::Zero(5));
    Matrix kk(5, 5);
    for (Index i = 0; i < 5; ++i) {
      for (Index j = 0; j < 5; ++j) {
        kk(i, j) = oracle_kernel(kern, x, i, x, j);
      }
      kk(i, i) += noise + m.factor.jitter;
    }
    const double want = -0.5 * std::log(kk.determinant()) - 2.5 * std::log(2.0 * std::numbers::pi);
    EXPECT_NEAR(r.value, want, 1e-10);
  }
}

TEST(GPLikelihood, MatchesDenseDeterminantFormula) {
  std::mt19937_64 rng(36);
  for (int k = 0; k < 30; ++k) {
    const Index n = 1 + k % 8;
    const auto kern = random_kernel(rng, 1);
    const Matrix x = oracle::uniform_matrix(rng, n, 1);
    const Vector y = oracle::uniform_vector(rng, n, -2, 2);
    const double noise = oracle::uniform_vector(rng, 1, 1e-3, 0.1)(0);
    const double mean = oracle::uniform_vector(rng, 1, -1, 1)(0);
    const auto r = gp_log_marginal_likelihood(kern, noise, x, y, mean);
    const auto m = gp_fit(kern, noise, x, y, mean);
    Matrix kk(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        kk(i, j) = oracle_kernel(kern, x, i, x, j);
      }
      kk(i, i) += noise + m.factor.jitter;
    }
    EXPECT_NEAR(r.value, oracle::gaussian_log_density(kk, y.array() - mean), 1e-8);
  }
}

TEST(GPLikelihood, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(37);
  for (int k = 0; k < 20; ++k) {
    const Index dim = 1 + k % 2;
    GPParameters p;
    p.kernel = random_kernel(rng, dim, k % 2 ? KernelKind::Matern52 : KernelKind::SquaredExponential);
    p.log_noise_variance = std::log(oracle::uniform_vector(rng, 1, 1e-3, 0.1)(0));
    p.mean = oracle::uniform_vector(rng, 1, -0.5, 0.5)(0);
    const Matrix x = oracle::uniform_matrix(rng, 5, dim);
    const Vector y = oracle::uniform_vector(rng, 5, -1, 1);
    auto value = [&](const Vector &v) {
      const auto q = unflatten(v, p);
      return gp_log_marginal_likelihood(q.kernel, q.noise_variance(), x, y, q.mean).value;
    };
    const Vector v0 = flatten(p);
    const Vector analytic =
        gp_log_marginal_likelihood(p.kernel, p.noise_variance(), x, y, p.mean).gradient;
    const Vector fd = oracle::central_difference(value, v0);
    ASSERT_EQ(analytic.size(), fd.size());
    for (Index i = 0; i < fd.size(); ++i) {
      const double denom = std::max({std::abs(analytic(i)), std::abs(fd(i)), 1e-8});
      EXPECT_LT(std::abs(analytic(i) - fd(i)) / denom, 1e-4) << "parameter " << i;
    }
  }
}

TEST(GPLikelihood, MeanGradientIsSumOfWeights) {
  const auto k = ScalarKernelSpec::isotropic(KernelKind::SquaredExponential, 1, 0.4, 1.0);
  Vector y(3);
  y << 1.0, 2.0, 0.5;
  const auto r = gp_log_marginal_likelihood(k, 0.1, col({0.0, 0.5, 1.0}), y, 0.3);
  const auto m = gp_fit(k, 0.1, col({0.0, 0.5, 1.0}), y, 0.3);
  EXPECT_NEAR(r.gradient(k.num_params() + 1), m.weights.sum(), 1e-14);
}

TEST(GPLikelihood, NoiseBelowFloorHasZeroGradient) {
  const auto k = ScalarKernelSpec::isotropic(KernelKind::SquaredExponential, 1, 0.4, 1.0);
  const auto r = gp_log_marginal_likelihood(k, 1e-12, col({0.0, 0.5}), Vector::Ones(2));
  EXPECT_EQ(r.gradient(k.num_params()), 0.0);
}

TEST(CheckGradients, QuadraticIsExact) {
  auto quad = [](const Vector &v) { return LikelihoodResult{0.5 * v.squaredNorm(), v}; };
  // Components of order one: central-difference roundoff is about
  // ε|f|/h in absolute terms, so tiny gradient entries inflate relative error.
  Vector p(4);
  p << 0.5, -1.2, 2.0, 1.0;
  EXPECT_LT(check_gradients(quad, p), 1e-9);
}

TEST(CheckGradients, DetectsWrongGradient) {
  auto wrong = [](const Vector &v) { return LikelihoodResult{0.5 * v.squaredNorm(), -v}; };
  EXPECT_GT(check_gradients(wrong, Vector::Ones(2)), 1.0);
}
