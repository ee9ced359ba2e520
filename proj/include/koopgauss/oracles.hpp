#pragma once

#include "koopgauss/gaussian_rkhs.hpp"
#include "koopgauss/ou_process.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace koopgauss {

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

// Plain Monte Carlo estimate of (K^t f)(x) = E[f(X_t) | X_0 = x] from exact
// transition draws; deliberately independent of the closed-form machinery.
inline MCEstimate mc_koopman(const LinearSDE& sys, const SpanElement& f, double t,
                             const Vector& x, std::size_t n, std::uint64_t seed) {
  if (n < 100) throw std::invalid_argument("mc_koopman: need n >= 100");
  Matrix draws = sample_transition(sys, t, x, n, seed);
  double sum = 0.0;
  double sumsq = 0.0;
  for (Index i = 0; i < draws.cols(); ++i) {
    double v = f.eval(draws.col(i));
    sum += v;
    sumsq += v * v;
  }
  double nd = static_cast<double>(n);
  MCEstimate est;
  est.mean = sum / nd;
  double var = std::max(0.0, (sumsq - nd * est.mean * est.mean) / (nd - 1.0));
  est.std_error = std::sqrt(var / nd);
  est.n = n;
  est.seed = seed;
  return est;
}

struct GaussianEnvelope {
  Vector center;
  Matrix cov;
};

namespace detail {

struct HermiteRule {
  Vector nodes;
  Vector weights;
};

// Golub-Welsch for the weight e^{-u^2}: Jacobi matrix has zero diagonal and
// off-diagonal beta_k = sqrt(k/2).
inline HermiteRule gauss_hermite(int order) {
  if (order < 1) throw std::invalid_argument("gauss_hermite: order must be >= 1");
  Matrix jacobi = Matrix::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    double beta = std::sqrt(0.5 * k);
    jacobi(k - 1, k) = beta;
    jacobi(k, k - 1) = beta;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(jacobi);
  if (es.info() != Eigen::Success) throw IllPosedError("gauss_hermite: eigensolver failed");
  HermiteRule rule;
  rule.nodes = es.eigenvalues();
  rule.weights =
      (std::sqrt(M_PI) * es.eigenvectors().row(0).transpose().array().square()).matrix();
  return rule;
}

}  // namespace detail

// Tensor Gauss-Hermite value of int_{R^d} g(y) dy after the substitution
// y = center + L u with L = cov^{1/2}; weights are rescaled by e^{u^2} per
// axis so g itself (not g over the envelope) is integrated.
inline double quad_integral(const std::function<double(const Vector&)>& g,
                            const GaussianEnvelope& env, int order) {
  require_square(env.cov, "quad_integral");
  if (env.center.size() != env.cov.rows())
    throw std::invalid_argument("quad_integral: envelope center dimension mismatch");
  const Index d = env.cov.rows();
  if (d > 3) throw UnsupportedCaseError("quad_integral: tensor grids support d <= 3 only");

  Matrix root = sym_sqrt(env.cov);
  double logdet_root = 0.5 * logdet_spd(env.cov);
  detail::HermiteRule rule = detail::gauss_hermite(order);
  Vector lifted = (rule.weights.array() * rule.nodes.array().square().exp()).matrix();

  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  Vector u(d);
  double acc = 0.0;
  while (true) {
    double w = 1.0;
    for (Index j = 0; j < d; ++j) {
      u(j) = rule.nodes(idx[static_cast<std::size_t>(j)]);
      w *= lifted(idx[static_cast<std::size_t>(j)]);
    }
    double val = g(env.center + root * u);
    if (!std::isfinite(val))
      throw IllPosedError("quad_integral: integrand returned a non-finite value");
    acc += w * val;

    Index axis = 0;
    while (axis < d && ++idx[static_cast<std::size_t>(axis)] == order) {
      idx[static_cast<std::size_t>(axis)] = 0;
      ++axis;
    }
    if (axis == d) break;
  }
  return std::exp(logdet_root) * acc;
}

inline double fd_derivative(const std::function<double(double)>& h, double t, double step) {
  if (!(step > 0.0) || !std::isfinite(step))
    throw std::invalid_argument("fd_derivative: step must be positive");
  return (h(t + step) - h(t - step)) / (2.0 * step);
}

// One-sided second-order stencil for boundary points (t = 0 of f_x).
inline double fd_derivative_forward(const std::function<double(double)>& h, double t,
                                    double step) {
  if (!(step > 0.0) || !std::isfinite(step))
    throw std::invalid_argument("fd_derivative_forward: step must be positive");
  return (-3.0 * h(t) + 4.0 * h(t + step) - h(t + 2.0 * step)) / (2.0 * step);
}

}  // namespace koopgauss
