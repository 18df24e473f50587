#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's numerical code: kernels are re-derived from their
// closed forms, Gaussian conditioning uses a dense LU solve, and Kronecker
// products are spelled out index by index.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// σ² exp(-½ Σ ((x_p - y_p)/ℓ_p)²)
inline double se(const Vector &x, const Vector &y, const Vector &ls, double sf2) {
  double r2 = 0.0;
  for (Index p = 0; p < x.size(); ++p) {
    const double d = (x(p) - y(p)) / ls(p);
    r2 += d * d;
  }
  return sf2 * std::exp(-0.5 * r2);
}

/// σ² (1 + √5 r + 5r²/3) exp(-√5 r)
inline double matern52(const Vector &x, const Vector &y, const Vector &ls, double sf2) {
  double r2 = 0.0;
  for (Index p = 0; p < x.size(); ++p) {
    const double d = (x(p) - y(p)) / ls(p);
    r2 += d * d;
  }
  const double r = std::sqrt(r2);
  const double s5 = std::sqrt(5.0);
  return sf2 * (1.0 + s5 * r + 5.0 * r2 / 3.0) * std::exp(-s5 * r);
}

struct Conditioned {
  Vector mean;
  Matrix cov;
};

/// Posterior of f* given y under the joint Gaussian
/// [y; f*] ~ N([m; m*], [[Kyy, Kys], [Ksy, Kss]]).
inline Conditioned condition(const Matrix &kyy, const Matrix &kys, const Matrix &kss,
                             const Vector &y, const Vector &m, const Vector &mstar) {
  const Eigen::FullPivLU<Matrix> lu(kyy);
  return {mstar + kys.transpose() * lu.solve(y - m),
          kss - kys.transpose() * lu.solve(kys)};
}

/// Multivariate normal log-density via the dense determinant.
inline double gaussian_log_density(const Matrix &k, const Vector &r) {
  const Eigen::FullPivLU<Matrix> lu(k);
  const double n = static_cast<double>(r.size());
  return -0.5 * r.dot(lu.solve(r)) - 0.5 * std::log(lu.determinant()) -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

inline Matrix kron(const Matrix &a, const Matrix &b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      for (Index k = 0; k < b.rows(); ++k) {
        for (Index l = 0; l < b.cols(); ++l) {
          out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
        }
      }
    }
  }
  return out;
}

/// Central difference of a scalar function of a vector.
template <typename F>
Vector central_difference(F f, const Vector &x, double h = 1e-6) {
  Vector g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    Vector hi = x;
    Vector lo = x;
    hi(i) += h;
    lo(i) -= h;
    g(i) = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

inline double forrester(double x, double a, double b) {
  const double u = 6.0 * x - 2.0;
  return a * u * u * std::sin(12.0 * x - 4.0) + b * (x - 0.5);
}

inline double pearson(const Vector &a, const Vector &b) {
  const double n = static_cast<double>(a.size());
  const double ma = a.sum() / n;
  const double mb = b.sum() / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    sab += (a(i) - ma) * (b(i) - mb);
    saa += (a(i) - ma) * (a(i) - ma);
    sbb += (b(i) - mb) * (b(i) - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline Matrix uniform_matrix(std::mt19937_64 &rng, Index rows, Index cols, double lo = 0.0,
                             double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) {
    m(i) = u(rng);
  }
  return m;
}

inline Vector uniform_vector(std::mt19937_64 &rng, Index n, double lo, double hi) {
  return uniform_matrix(rng, n, 1, lo, hi);
}

inline Matrix normal_matrix(std::mt19937_64 &rng, Index rows, Index cols) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) {
    m(i) = n01(rng);
  }
  return m;
}

inline double max_abs(const Matrix &a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

} // namespace oracle
