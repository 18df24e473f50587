#pragma once

#include "mtgp/common.hpp"

#include <cmath>
#include <sstream>

namespace mtgp {

/// Jitter policy for factorizing covariance matrices. Jitter values are
/// relative to the mean diagonal of the matrix being factorized.
struct FactorOptions {
  double initial_jitter = 1e-8;
  double max_jitter = 1e-4;
  double growth = 10.0;
};

/// Cholesky factor of `A + jitter * I` where `jitter` is the absolute
/// amount that was needed for the factorization to succeed.
struct JitteredCholesky {
  Eigen::LLT<Matrix> llt;
  double jitter = 0.0;
  /// `jitter` divided by the mean diagonal of A. Because the jitter tracks
  /// the matrix scale, likelihood gradients include its derivative.
  double relative_jitter = 0.0;

  Matrix lower() const { return llt.matrixL(); }

  double log_determinant() const {
    const auto &l = llt.matrixLLT();
    double s = 0.0;
    for (Index i = 0; i < l.rows(); ++i) {
      s += std::log(l(i, i));
    }
    return 2.0 * s;
  }

  Vector solve(const Vector &b) const { return llt.solve(b); }
  Matrix solve(const Matrix &b) const { return llt.solve(b); }

  Matrix inverse() const {
    return llt.solve(Matrix::Identity(llt.rows(), llt.rows()));
  }
};

namespace detail {

inline bool pivots_positive(const Eigen::LLT<Matrix> &llt) {
  if (llt.info() != Eigen::Success) {
    return false;
  }
  const auto &l = llt.matrixLLT();
  for (Index i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) > 0.0) || !std::isfinite(l(i, i))) {
      return false;
    }
  }
  return true;
}

} // namespace detail

/// Factorizes a symmetric matrix, escalating the jitter geometrically on
/// failure. With `initial_jitter == 0` exactly one unjittered attempt is made.
inline JitteredCholesky cholesky_with_jitter(const Matrix &a,
                                             const FactorOptions &opts = {}) {
  require_shape(a.rows() == a.cols(), "cholesky: matrix must be square");
  require_shape(a.rows() > 0, "cholesky: matrix must be nonempty");
  if (!a.allFinite()) {
    throw IllConditionedError("cholesky: matrix has non-finite entries");
  }
  const double scale = a.diagonal().mean();
  double rel = opts.initial_jitter;
  while (true) {
    const double jitter = rel * std::max(scale, 0.0);
    Matrix shifted = a;
    shifted.diagonal().array() += jitter;
    JitteredCholesky out{Eigen::LLT<Matrix>(shifted), jitter, jitter > 0.0 ? rel : 0.0};
    if (detail::pivots_positive(out.llt)) {
      return out;
    }
    if (rel <= 0.0 || rel * opts.growth > opts.max_jitter * (1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "covariance matrix of size " << a.rows()
          << " is not positive definite (relative jitter reached " << rel
          << ")";
      throw IllConditionedError(msg.str());
    }
    rel *= opts.growth;
  }
}

} // namespace mtgp
