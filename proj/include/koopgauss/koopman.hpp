#pragma once

#include "koopgauss/gaussian_rkhs.hpp"
#include "koopgauss/ou_process.hpp"

#include <cmath>
#include <vector>

namespace koopgauss {

struct Certificate {
  double slack = 0.0;
  bool holds = false;
  Matrix matrix;
};

// Slack convention: lambda_min of B B^T - (A C^2 + C^2 A^T)/2, symmetrized.
inline Certificate certificate(const LinearSDE& sys, const Covariance& cov) {
  if (cov.dim() != sys.dim()) throw std::invalid_argument("certificate: dimension mismatch");
  Matrix c2 = symmetrized(cov.matrix() * cov.matrix());
  Certificate cert;
  cert.matrix =
      symmetrized(sys.diffusion() - 0.5 * (sys.A() * c2 + c2 * sys.A().transpose()));
  cert.slack = psd_slack(cert.matrix);
  cert.holds = cert.slack >= -psd_tolerance(cert.matrix);
  return cert;
}

struct KoopmanImage {
  double tau = 1.0;
  Covariance cov_t;
  std::vector<Vector> centers;
  Vector coeffs;
  double horizon = 0.0;
};

// K^t k_z^C = tau_t k^{C_t}_{e^{-At} z} with
//   C_t  = [e^{-At} (C^2 + 2 Sigma(t)) e^{-A^T t}]^{1/2},
//   tau_t = det C / det(C^2 + 2 Sigma(t))^{1/2},
// extended to spans by linearity (coefficients are untouched).
inline KoopmanImage propagate(const LinearSDE& sys, const SpanElement& f, double t) {
  if (f.cov.dim() != sys.dim()) throw std::invalid_argument("propagate: dimension mismatch");
  if (!std::isfinite(t) || t < 0.0)
    throw std::domain_error("propagate: t must be finite and nonnegative");
  if (t == 0.0) return KoopmanImage{1.0, f.cov, f.centers, f.coeffs, 0.0};

  Matrix back = matrix_exp(sys.A(), -t);
  Matrix inflated = symmetrized(f.cov.matrix() * f.cov.matrix() +
                                2.0 * gramian_finite(sys.A(), sys.B(), t));

  // C_t through the SVD of e^{-At} (C^2 + 2 Sigma)^{1/2}: same matrix as the
  // symmetrized square root of e^{-At}(C^2+2Sigma)e^{-A^T t}, but the
  // conditioning enters once instead of squared, which the determinant
  // identity needs at large t.
  Matrix half = back * sym_sqrt(inflated);
  Eigen::JacobiSVD<Matrix> svd(half, Eigen::ComputeFullU);
  Matrix ct = symmetrized(svd.matrixU() * svd.singularValues().asDiagonal() *
                          svd.matrixU().transpose());

  KoopmanImage img{std::exp(f.cov.logdet() - 0.5 * logdet_spd(inflated)),
                   Covariance(ct),
                   std::vector<Vector>(),
                   f.coeffs,
                   t};
  img.centers.reserve(f.centers.size());
  for (const Vector& x : f.centers) img.centers.push_back(back * x);
  return img;
}

inline double image_eval(const KoopmanImage& img, const Vector& x) {
  double acc = 0.0;
  for (std::size_t j = 0; j < img.centers.size(); ++j)
    acc += img.coeffs(static_cast<Index>(j)) * kernel_eval(img.cov_t, img.centers[j], x);
  return img.tau * acc;
}

inline double image_norm_ct(const KoopmanImage& img) {
  Matrix g = gram_matrix(img.cov_t, img.centers);
  return img.tau * std::sqrt(std::max(0.0, img.coeffs.dot(g * img.coeffs)));
}

struct NormRouteReport {
  double via_mapped = 0.0;
  double via_original = 0.0;
  double rel_deviation = 0.0;
};

// ||K^t f||_{C_t} two ways: the Gram of k^{C_t} at the mapped centers, and
// the Gram of k^{(C^2+2Sigma(t))^{1/2}} at the original centers.
inline NormRouteReport image_norm_routes(const LinearSDE& sys, const SpanElement& f,
                                         const KoopmanImage& img) {
  NormRouteReport r;
  r.via_mapped = image_norm_ct(img);
  if (f.centers.size() != img.centers.size())
    throw std::invalid_argument("image_norm_routes: center count mismatch");
  Matrix inflated = symmetrized(f.cov.matrix() * f.cov.matrix() +
                                2.0 * gramian_finite(sys.A(), sys.B(), img.horizon));
  Covariance mid(sym_sqrt(inflated));
  Matrix g = gram_matrix(mid, f.centers);
  r.via_original = img.tau * std::sqrt(std::max(0.0, img.coeffs.dot(g * img.coeffs)));
  double scale = std::max({std::abs(r.via_mapped), std::abs(r.via_original), 1e-300});
  r.rel_deviation = std::abs(r.via_mapped - r.via_original) / scale;
  return r;
}

struct NormBoundReport {
  Certificate cert;
  double horizon = 0.0;
  double tau = 1.0;
  double norm_f = 0.0;
  double norm_image_ct = 0.0;
  double upper_proxy = 0.0;
  double bound = 0.0;
  double det_identity_lhs = 0.0;
  double det_identity_rhs = 0.0;
  double route_deviation = 0.0;
  bool verified = false;
  bool chain_ok = false;
};

// The norm chain
//   ||K^t f||_C^2 <= (det C_t / det C) ||K^t f||_{C_t}^2
//                 <= tau_t (det C_t / det C) ||f||_C^2 = det(e^{-At}) ||f||_C^2,
// which needs the certificate for the first step; callers can force an
// unverified report via allow_unverified.
inline NormBoundReport norm_bound_report(const LinearSDE& sys, const SpanElement& f, double t,
                                         bool allow_unverified = false) {
  NormBoundReport rep;
  rep.cert = certificate(sys, f.cov);
  if (!rep.cert.holds && !allow_unverified)
    throw CertificateError("norm_bound_report: certificate fails, slack = " +
                               std::to_string(rep.cert.slack),
                           rep.cert.slack);
  KoopmanImage img = propagate(sys, f, t);
  NormRouteReport routes = image_norm_routes(sys, f, img);

  rep.horizon = t;
  rep.tau = img.tau;
  rep.norm_f = rkhs_norm(f);
  rep.norm_image_ct = routes.via_mapped;
  rep.route_deviation = routes.rel_deviation;
  double half_logdet_ratio = 0.5 * (img.cov_t.logdet() - f.cov.logdet());
  rep.upper_proxy = std::exp(half_logdet_ratio) * rep.norm_image_ct;
  rep.bound = std::exp(-0.5 * t * sys.A().trace()) * rep.norm_f;
  rep.det_identity_lhs = img.tau * std::exp(img.cov_t.logdet() - f.cov.logdet());
  rep.det_identity_rhs = std::exp(-t * sys.A().trace());
  rep.verified = rep.cert.holds;
  double tol_a = 1e-10 * std::max(1.0, rep.norm_f);
  double tol_b = 1e-10 * std::max(1.0, rep.bound);
  rep.chain_ok = rep.norm_image_ct <= std::sqrt(img.tau) * rep.norm_f + tol_a &&
                 rep.upper_proxy <= rep.bound + tol_b;
  return rep;
}

struct FxPoint {
  double value = 0.0;
  double derivative = 0.0;
};

// f_x(t) = <C_t^2 x, x>, with the closed derivative
//   <[2BB^T - (AC^2 + C^2 A^T)] e^{-A^T t} x, e^{-A^T t} x>.
inline FxPoint fx_curve(const LinearSDE& sys, const Covariance& cov, const Vector& x,
                        double t) {
  if (cov.dim() != sys.dim() || x.size() != sys.dim())
    throw std::invalid_argument("fx_curve: dimension mismatch");
  if (!std::isfinite(t) || t < 0.0)
    throw std::domain_error("fx_curve: t must be finite and nonnegative");
  Matrix back = matrix_exp(sys.A(), -t);
  Matrix c2 = symmetrized(cov.matrix() * cov.matrix());
  Matrix inflated = c2 + 2.0 * gramian_finite(sys.A(), sys.B(), t);
  Matrix ct2 = symmetrized(back * inflated * back.transpose());
  Matrix gen = symmetrized(2.0 * sys.diffusion() -
                           (sys.A() * c2 + c2 * sys.A().transpose()));
  Vector u = back.transpose() * x;
  FxPoint p;
  p.value = x.dot(ct2 * x);
  p.derivative = u.dot(gen * u);
  return p;
}

struct SemigroupReport {
  double tau_dev = 0.0;
  double cov_dev = 0.0;
  double center_dev = 0.0;
  double max_rel_dev = 0.0;
};

// Checks K^{t+s} = K^s o K^t on the closed-form parameters: one propagation
// over t+s against re-propagating the t-image (viewed as a span over C_t).
inline SemigroupReport semigroup_check(const LinearSDE& sys, const SpanElement& f, double t,
                                       double s) {
  if (!std::isfinite(t) || t < 0.0 || !std::isfinite(s) || s < 0.0)
    throw std::domain_error("semigroup_check: t and s must be finite and nonnegative");
  KoopmanImage direct = propagate(sys, f, t + s);
  KoopmanImage step1 = propagate(sys, f, t);
  SpanElement mid(step1.cov_t, step1.centers, step1.coeffs);
  KoopmanImage step2 = propagate(sys, mid, s);

  SemigroupReport rep;
  double tau_two = step1.tau * step2.tau;
  rep.tau_dev = std::abs(tau_two - direct.tau) / std::max(std::abs(direct.tau), 1e-300);
  rep.cov_dev = (step2.cov_t.matrix() - direct.cov_t.matrix()).norm() /
                std::max(1.0, direct.cov_t.matrix().norm());
  for (std::size_t j = 0; j < direct.centers.size(); ++j) {
    double dev = (step2.centers[j] - direct.centers[j]).norm() /
                 std::max(1.0, direct.centers[j].norm());
    rep.center_dev = std::max(rep.center_dev, dev);
  }
  rep.max_rel_dev = std::max({rep.tau_dev, rep.cov_dev, rep.center_dev});
  return rep;
}

}  // namespace koopgauss
