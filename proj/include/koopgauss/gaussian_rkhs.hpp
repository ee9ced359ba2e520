#pragma once

#include "koopgauss/matrix_core.hpp"

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

namespace koopgauss {

// Positive definite C for the kernel exp(-||C^{-1}(x-y)||^2), with the
// inverse and log det cached off one eigendecomposition.
class Covariance {
 public:
  explicit Covariance(Matrix c) : c_(symmetrized(std::move(c))) {
    require_finite(c_, "Covariance");
    require_dim_cap(c_.rows(), "Covariance");
    Eigen::SelfAdjointEigenSolver<Matrix> es(c_);
    if (es.info() != Eigen::Success) throw IllPosedError("Covariance: eigensolver failed");
    double tol = kPsdTol * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() <= tol)
      throw NotPsdError("Covariance: C must be positive definite, lambda_min = " +
                        std::to_string(es.eigenvalues().minCoeff()));
    inv_ = symmetrized(es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
                       es.eigenvectors().transpose());
    logdet_ = es.eigenvalues().array().log().sum();
  }

  const Matrix& matrix() const { return c_; }
  const Matrix& inverse() const { return inv_; }
  double logdet() const { return logdet_; }
  Index dim() const { return c_.rows(); }

 private:
  Matrix c_;
  Matrix inv_;
  double logdet_ = 0.0;
};

inline double kernel_eval(const Covariance& cov, const Vector& x, const Vector& y) {
  require_same_size(x, y, "kernel_eval");
  if (x.size() != cov.dim()) throw std::invalid_argument("kernel_eval: dimension mismatch");
  return std::exp(-(cov.inverse() * (x - y)).squaredNorm());
}

inline Matrix gram_matrix(const Covariance& cov, const std::vector<Vector>& points) {
  if (points.empty()) throw std::invalid_argument("gram_matrix: empty point list");
  const Index n = static_cast<Index>(points.size());
  Matrix g(n, n);
  for (Index i = 0; i < n; ++i) {
    g(i, i) = 1.0;
    for (Index j = i + 1; j < n; ++j) {
      g(i, j) = kernel_eval(cov, points[static_cast<std::size_t>(i)],
                            points[static_cast<std::size_t>(j)]);
      g(j, i) = g(i, j);
    }
  }
  return g;
}

struct SpanElement {
  Covariance cov;
  std::vector<Vector> centers;
  Vector coeffs;

  SpanElement(Covariance c, std::vector<Vector> xs, Vector alphas)
      : cov(std::move(c)), centers(std::move(xs)), coeffs(std::move(alphas)) {
    if (centers.empty()) throw std::invalid_argument("SpanElement: need at least one center");
    if (coeffs.size() != static_cast<Index>(centers.size()))
      throw std::invalid_argument("SpanElement: centers and coeffs lengths differ");
    if (!coeffs.allFinite()) throw std::invalid_argument("SpanElement: non-finite coefficient");
    for (const Vector& x : centers) {
      if (x.size() != cov.dim())
        throw std::invalid_argument("SpanElement: center dimension mismatch");
      if (!x.allFinite()) throw std::invalid_argument("SpanElement: non-finite center");
    }
  }

  double eval(const Vector& x) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < centers.size(); ++j)
      acc += coeffs(static_cast<Index>(j)) * kernel_eval(cov, centers[j], x);
    return acc;
  }
};

inline double rkhs_norm(const SpanElement& f) {
  Matrix g = gram_matrix(f.cov, f.centers);
  return std::sqrt(std::max(0.0, f.coeffs.dot(g * f.coeffs)));
}

struct InclusionResult {
  bool included = false;
  double slack = 0.0;
  std::optional<double> embed_const;
};

// H_{C1} embeds in H_{C2} iff C1^2 >= C2^2; the decision lives on the
// squares, never on C1 - C2.
inline InclusionResult inclusion_test(const Covariance& c1, const Covariance& c2) {
  if (c1.dim() != c2.dim()) throw std::invalid_argument("inclusion_test: dimension mismatch");
  Matrix diff = symmetrized(c1.matrix() * c1.matrix() - c2.matrix() * c2.matrix());
  InclusionResult r;
  r.slack = psd_slack(diff);
  r.included = r.slack >= -psd_tolerance(diff);
  if (r.included) r.embed_const = std::exp(0.5 * (c1.logdet() - c2.logdet()));
  return r;
}

inline double dominance_psd_test(double c, const Covariance& cov1, const Covariance& cov2,
                                 const std::vector<Vector>& points) {
  if (!(c > 0.0) || !std::isfinite(c))
    throw std::invalid_argument("dominance_psd_test: scale must be positive");
  Matrix g1 = gram_matrix(cov1, points);
  Matrix g2 = gram_matrix(cov2, points);
  return psd_slack(c * c * g2 - g1);
}

// int k_z^{C1}(y) k_w^{C2}(y) dy
//   = pi^{d/2} / det(C1^{-2} + C2^{-2})^{1/2} * k^{(C1^2+C2^2)^{1/2}}(z, w).
inline double product_integral(const Covariance& cov1, const Vector& z, const Covariance& cov2,
                               const Vector& w) {
  if (cov1.dim() != cov2.dim())
    throw std::invalid_argument("product_integral: covariance dimensions differ");
  require_same_size(z, w, "product_integral");
  if (z.size() != cov1.dim()) throw std::invalid_argument("product_integral: point dimension");
  const double d = static_cast<double>(cov1.dim());

  Matrix precision_sum =
      symmetrized(cov1.inverse() * cov1.inverse() + cov2.inverse() * cov2.inverse());
  Matrix square_sum =
      symmetrized(cov1.matrix() * cov1.matrix() + cov2.matrix() * cov2.matrix());
  Eigen::LLT<Matrix> llt(square_sum);
  if (llt.info() != Eigen::Success)
    throw IllPosedError("product_integral: C1^2 + C2^2 not positive definite");
  Vector delta = z - w;
  double expo = delta.dot(llt.solve(delta));
  return std::exp(0.5 * d * std::log(M_PI) - 0.5 * logdet_spd(precision_sum) - expo);
}

inline double tensor_kernel_eval(const std::vector<double>& sigmas, const Vector& x,
                                 const Vector& y) {
  require_same_size(x, y, "tensor_kernel_eval");
  if (x.size() != static_cast<Index>(sigmas.size()))
    throw std::invalid_argument("tensor_kernel_eval: sigma count must match dimension");
  double expo = 0.0;
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    if (!(sigmas[i] > 0.0) || !std::isfinite(sigmas[i]))
      throw std::invalid_argument("tensor_kernel_eval: sigma must be positive");
    double r = (x(static_cast<Index>(i)) - y(static_cast<Index>(i))) / sigmas[i];
    expo += r * r;
  }
  return std::exp(-expo);
}

}  // namespace koopgauss
