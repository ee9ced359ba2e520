#pragma once

#include "koopgauss/matrix_core.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

namespace koopgauss {

inline Index controllability_rank(const Matrix& a, const Matrix& b) {
  const Index d = a.rows();
  const Index m = b.cols();
  Matrix ctrb(d, d * m);
  Matrix block = b;
  for (Index k = 0; k < d; ++k) {
    ctrb.middleCols(k * m, m) = block;
    block = a * block;
  }
  Eigen::JacobiSVD<Matrix> svd(ctrb);
  double smax = svd.singularValues()(0);
  if (smax <= 0.0) return 0;
  return (svd.singularValues().array() > 1e-10 * smax).count();
}

// Largest real part over the spectrum of A, with one attaining eigenvalue.
inline std::complex<double> spectral_abscissa_eig(const Matrix& a) {
  Eigen::EigenSolver<Matrix> es(a);
  if (es.info() != Eigen::Success) throw IllPosedError("spectral_abscissa: eigensolver failed");
  Index worst = 0;
  for (Index i = 1; i < a.rows(); ++i)
    if (es.eigenvalues()(i).real() > es.eigenvalues()(worst).real()) worst = i;
  return es.eigenvalues()(worst);
}

class LinearSDE {
 public:
  LinearSDE(Matrix a, Matrix b) : a_(std::move(a)), b_(std::move(b)) {
    require_square(a_, "LinearSDE");
    require_finite(a_, "LinearSDE");
    require_finite(b_, "LinearSDE");
    require_dim_cap(a_.rows(), "LinearSDE");
    if (b_.rows() != a_.rows())
      throw std::invalid_argument("LinearSDE: B must have as many rows as A");
    if (b_.cols() < 1 || b_.cols() > a_.rows())
      throw std::invalid_argument("LinearSDE: B must be d x m with 1 <= m <= d");

    Index rank = controllability_rank(a_, b_);
    if (rank < a_.rows())
      throw NotControllableError(
          "LinearSDE: (A, B) not controllable, Kalman rank " + std::to_string(rank) +
              " < " + std::to_string(a_.rows()),
          rank);
    std::complex<double> top = spectral_abscissa_eig(a_);
    if (top.real() >= 0.0)
      throw NotHurwitzError("LinearSDE: A not Hurwitz, eigenvalue with Re = " +
                                std::to_string(top.real()),
                            top);
    sigma_inf_ = solve_lyapunov(a_, b_ * b_.transpose());
  }

  const Matrix& A() const { return a_; }
  const Matrix& B() const { return b_; }
  const Matrix& sigma_inf() const { return sigma_inf_; }
  Matrix diffusion() const { return symmetrized(b_ * b_.transpose()); }
  Index dim() const { return a_.rows(); }

 private:
  Matrix a_;
  Matrix b_;
  Matrix sigma_inf_;
};

inline LinearSDE validate_system(const Matrix& a, const Matrix& b) { return LinearSDE(a, b); }

struct TransitionLaw {
  Matrix mean_map;
  Matrix cov;
  double horizon = 0.0;
};

inline TransitionLaw transition_law(const LinearSDE& sys, double t) {
  if (!std::isfinite(t) || t < 0.0)
    throw std::domain_error("transition_law: t must be finite and nonnegative");
  TransitionLaw law;
  law.mean_map = matrix_exp(sys.A(), t);
  law.cov = gramian_finite(sys.A(), sys.B(), t);
  law.horizon = t;
  return law;
}

inline double transition_density(const LinearSDE& sys, double t, const Vector& x,
                                 const Vector& y) {
  if (!std::isfinite(t) || t <= 0.0)
    throw std::domain_error("transition_density: t must be positive");
  if (x.size() != sys.dim() || y.size() != sys.dim())
    throw std::invalid_argument("transition_density: point dimension mismatch");
  TransitionLaw law = transition_law(sys, t);
  Eigen::LLT<Matrix> llt(law.cov);
  if (llt.info() != Eigen::Success)
    throw IllPosedError("transition_density: Sigma(t) not positive definite");
  double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  Vector delta = y - law.mean_map * x;
  double quad = delta.dot(llt.solve(delta));
  double d = static_cast<double>(sys.dim());
  return std::exp(-0.5 * quad - 0.5 * logdet - 0.5 * d * std::log(2.0 * M_PI));
}

inline double stationary_density(const LinearSDE& sys, const Vector& x) {
  if (x.size() != sys.dim())
    throw std::invalid_argument("stationary_density: point dimension mismatch");
  Eigen::LLT<Matrix> llt(sys.sigma_inf());
  if (llt.info() != Eigen::Success)
    throw IllPosedError("stationary_density: Sigma not positive definite");
  double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  double quad = x.dot(llt.solve(x));
  double d = static_cast<double>(sys.dim());
  return std::exp(-0.5 * quad - 0.5 * logdet - 0.5 * d * std::log(2.0 * M_PI));
}

inline constexpr std::size_t kSampleChunk = 4096;

// n exact draws from N(e^{At} x, Sigma(t)), one per column. The stream is a
// pure function of seed: chunk c of size 4096 uses generator seed ^ c, so the
// result is independent of how chunks would be scheduled.
inline Matrix sample_transition(const LinearSDE& sys, double t, const Vector& x, std::size_t n,
                                std::uint64_t seed) {
  if (!std::isfinite(t) || t <= 0.0)
    throw std::domain_error("sample_transition: t must be positive");
  if (x.size() != sys.dim())
    throw std::invalid_argument("sample_transition: point dimension mismatch");
  if (n < 1) throw std::invalid_argument("sample_transition: need n >= 1");

  TransitionLaw law = transition_law(sys, t);
  if (!law.cov.allFinite() || law.cov.cwiseAbs().maxCoeff() <= 0.0)
    throw SamplingError("sample_transition: Sigma(t) is numerically singular");
  Matrix root;
  try {
    root = sym_sqrt(law.cov);
  } catch (const NotPsdError& e) {
    throw SamplingError(std::string("sample_transition: ") + e.what());
  }
  Vector mean = law.mean_map * x;

  const Index d = sys.dim();
  Matrix draws(d, static_cast<Index>(n));
  Vector xi(d);
  std::size_t chunks = (n + kSampleChunk - 1) / kSampleChunk;
  for (std::size_t c = 0; c < chunks; ++c) {
    std::mt19937_64 rng(seed ^ static_cast<std::uint64_t>(c));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::size_t end = std::min(n, (c + 1) * kSampleChunk);
    for (std::size_t i = c * kSampleChunk; i < end; ++i) {
      for (Index j = 0; j < d; ++j) xi(j) = gauss(rng);
      draws.col(static_cast<Index>(i)) = mean + root * xi;
    }
  }
  return draws;
}

}  // namespace koopgauss
