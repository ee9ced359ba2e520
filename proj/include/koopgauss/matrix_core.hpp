#pragma once

#include "koopgauss/common.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <limits>

namespace koopgauss {

inline double psd_tolerance(const Matrix& s) {
  double scale = s.selfadjointView<Eigen::Lower>().operatorNorm();
  return kPsdTol * std::max(1.0, scale);
}

// Smallest eigenvalue of (S + S^T)/2.
inline double psd_slack(const Matrix& s) {
  require_square(s, "psd_slack");
  require_finite(s, "psd_slack");
  Matrix sym = symmetrized(s);
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw IllPosedError("psd_slack: eigensolver failed");
  return es.eigenvalues().minCoeff();
}

inline Matrix matrix_exp(const Matrix& m, double t) {
  require_square(m, "matrix_exp");
  require_finite(m, "matrix_exp");
  require_dim_cap(m.rows(), "matrix_exp");
  if (!std::isfinite(t)) throw std::invalid_argument("matrix_exp: t must be finite");
  if (t == 0.0) return Matrix::Identity(m.rows(), m.cols());
  return (t * m).exp();
}

inline Matrix sym_sqrt(const Matrix& s) {
  require_square(s, "sym_sqrt");
  require_finite(s, "sym_sqrt");
  Matrix sym = symmetrized(s);
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) throw IllPosedError("sym_sqrt: eigensolver failed");
  double tol = kPsdTol * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -tol)
    throw NotPsdError("sym_sqrt: matrix is not PSD, lambda_min = " +
                      std::to_string(es.eigenvalues().minCoeff()));
  Vector roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Matrix r = es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
  return symmetrized(r);
}

// Log-determinant of a symmetric positive definite matrix via Cholesky.
inline double logdet_spd(const Matrix& s) {
  require_square(s, "logdet_spd");
  require_finite(s, "logdet_spd");
  Eigen::LLT<Matrix> llt(symmetrized(s));
  if (llt.info() != Eigen::Success)
    throw NotPsdError("logdet_spd: Cholesky failed, matrix not positive definite");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

// Solves A X + X A^T + Q = 0 (Bartels-Stewart on the complex Schur form of A).
inline Matrix solve_lyapunov(const Matrix& a, const Matrix& q) {
  require_square(a, "solve_lyapunov");
  require_square(q, "solve_lyapunov");
  require_finite(a, "solve_lyapunov");
  require_finite(q, "solve_lyapunov");
  require_dim_cap(a.rows(), "solve_lyapunov");
  if (a.rows() != q.rows())
    throw std::invalid_argument("solve_lyapunov: A and Q dimensions differ");
  const Index d = a.rows();

  Eigen::ComplexSchur<Eigen::MatrixXcd> schur(a.cast<std::complex<double>>());
  if (schur.info() != Eigen::Success) throw IllPosedError("solve_lyapunov: Schur failed");
  const Eigen::MatrixXcd& t = schur.matrixT();
  const Eigen::MatrixXcd& u = schur.matrixU();

  double eig_scale = t.diagonal().cwiseAbs().maxCoeff();
  double sep = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < d; ++i)
    for (Index k = 0; k < d; ++k)
      sep = std::min(sep, std::abs(t(i, i) + std::conj(t(k, k))));
  if (sep <= 1e-12 * std::max(1.0, eig_scale))
    throw IllPosedError("solve_lyapunov: spectrum violates lambda_i + lambda_j != 0");

  // T Y + Y T^H = -U^H Q U, solved column by column from the last one.
  Eigen::MatrixXcd qt = u.adjoint() * q.cast<std::complex<double>>() * u;
  Eigen::MatrixXcd y(d, d);
  Eigen::MatrixXcd shifted = t;
  for (Index k = d - 1; k >= 0; --k) {
    Eigen::VectorXcd rhs = -qt.col(k);
    if (k < d - 1)
      rhs.noalias() -= y.rightCols(d - 1 - k) * t.row(k).tail(d - 1 - k).adjoint();
    shifted.diagonal() = t.diagonal().array() + std::conj(t(k, k));
    y.col(k) = shifted.triangularView<Eigen::Upper>().solve(rhs);
  }
  Matrix x = (u * y * u.adjoint()).real();
  if (!x.allFinite()) throw IllPosedError("solve_lyapunov: non-finite solution");
  if (q.isApprox(q.transpose(), 1e-12)) x = symmetrized(x);
  return x;
}

namespace detail {

// Van Loan block-exponential Gramian over a short horizon: exp of
// [[-A, Q],[0, A^T]] * t has (1,2) block H with Sigma(t) = e^{A^T t}^T H.
inline Matrix gramian_van_loan(const Matrix& a, const Matrix& q, double t) {
  const Index d = a.rows();
  Matrix block = Matrix::Zero(2 * d, 2 * d);
  block.topLeftCorner(d, d) = -a;
  block.topRightCorner(d, d) = q;
  block.bottomRightCorner(d, d) = a.transpose();
  Matrix e = matrix_exp(block, t);
  Matrix sigma = e.bottomRightCorner(d, d).transpose() * e.topRightCorner(d, d);
  return symmetrized(sigma);
}

}  // namespace detail

// Sigma(t) = int_0^t e^{As} B B^T e^{A^T s} ds. Computed on a short base
// horizon (keeps the block exponential well scaled), then doubled via
// Sigma(2t) = Sigma(t) + e^{At} Sigma(t) e^{A^T t}.
inline Matrix gramian_finite(const Matrix& a, const Matrix& b, double t) {
  require_square(a, "gramian_finite");
  require_finite(a, "gramian_finite");
  require_finite(b, "gramian_finite");
  require_dim_cap(a.rows(), "gramian_finite");
  if (b.rows() != a.rows())
    throw std::invalid_argument("gramian_finite: B row count must match A");
  if (!std::isfinite(t) || t < 0.0)
    throw std::domain_error("gramian_finite: t must be finite and nonnegative");
  const Index d = a.rows();
  if (t == 0.0) return Matrix::Zero(d, d);

  Matrix q = symmetrized(b * b.transpose());
  double anorm = a.norm();
  int k = 0;
  while (anorm * t > 0.5 * std::pow(2.0, k) && k < 60) ++k;
  double t0 = t / std::pow(2.0, k);

  Matrix sigma = detail::gramian_van_loan(a, q, t0);
  Matrix e = matrix_exp(a, t0);
  for (int i = 0; i < k; ++i) {
    sigma = symmetrized(sigma + e * sigma * e.transpose());
    e = e * e;
  }
  return sigma;
}

inline constexpr double kInfiniteScale = std::numeric_limits<double>::infinity();

// Largest tau such that tau*C still satisfies the invariance inequality
// tau^2 * (A C^2 + C^2 A^T)/2 <= B B^T; +infinity when the left side is <= 0.
inline double max_scale_tau(const Matrix& a, const Matrix& b, const Matrix& c) {
  require_square(a, "max_scale_tau");
  require_square(c, "max_scale_tau");
  require_finite(a, "max_scale_tau");
  require_finite(b, "max_scale_tau");
  require_finite(c, "max_scale_tau");
  if (b.rows() != a.rows() || c.rows() != a.rows())
    throw std::invalid_argument("max_scale_tau: dimension mismatch");
  const Index d = a.rows();

  Matrix c2 = symmetrized(c * c);
  Matrix s = symmetrized(0.5 * (a * c2 + c2 * a.transpose()));
  Matrix w = symmetrized(b * b.transpose());

  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  if (es.info() != Eigen::Success) throw IllPosedError("max_scale_tau: eigensolver failed");
  double s_tol = kPsdTol * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().maxCoeff() <= s_tol) return kInfiniteScale;

  Eigen::SelfAdjointEigenSolver<Matrix> ew(w);
  if (ew.info() != Eigen::Success) throw IllPosedError("max_scale_tau: eigensolver failed");
  double w_tol = kPsdTol * std::max(1.0, ew.eigenvalues().cwiseAbs().maxCoeff());

  if (ew.eigenvalues().minCoeff() > w_tol) {
    // u = tau^2 obeys u * lambda_max(W^{-1/2} S W^{-1/2}) <= 1.
    Vector inv_roots = ew.eigenvalues().cwiseSqrt().cwiseInverse();
    Matrix wihalf = ew.eigenvectors() * inv_roots.asDiagonal() * ew.eigenvectors().transpose();
    double lmax = -psd_slack(-symmetrized(wihalf * s * wihalf));
    return 1.0 / std::sqrt(lmax);
  }

  // Singular B B^T: on its kernel the condition forces x^T S x <= 0, and the
  // admissible set {u >= 0 : lambda_min(W - uS) >= 0} is still an interval
  // since lambda_min is concave. Bracket, then bisect.
  for (Index i = 0; i < d; ++i) {
    if (ew.eigenvalues()(i) > w_tol) continue;
    Vector v = ew.eigenvectors().col(i);
    if (v.dot(s * v) > s_tol)
      throw UnsupportedCaseError(
          "max_scale_tau: B B^T singular and certificate matrix positive on its kernel");
  }
  double lo = 0.0, hi = 1.0;
  int guard = 0;
  while (psd_slack(w - hi * s) >= 0.0 && guard++ < 80) {
    lo = hi;
    hi *= 2.0;
  }
  if (guard >= 80)
    throw UnsupportedCaseError("max_scale_tau: no finite bracket for singular B B^T");
  for (int it = 0; it < 200 && (hi - lo) > 1e-13 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    (psd_slack(w - mid * s) >= 0.0 ? lo : hi) = mid;
  }
  return std::sqrt(0.5 * (lo + hi));
}

}  // namespace koopgauss
