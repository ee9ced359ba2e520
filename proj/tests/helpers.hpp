#pragma once

#include "koopgauss/koopman.hpp"
#include "koopgauss/matrix_core.hpp"
#include "koopgauss/ou_process.hpp"

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace kgtest {

using koopgauss::Index;
using koopgauss::Matrix;
using koopgauss::Vector;

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max({std::abs(got), std::abs(want), 1e-300});
}

inline double rel_err(const Matrix& got, const Matrix& want) {
  return (got - want).norm() / std::max(want.norm(), 1e-300);
}

inline Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = u(rng);
  return m;
}

inline Vector random_vector(std::mt19937_64& rng, Index d, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(d);
  for (Index i = 0; i < d; ++i) v(i) = u(rng);
  return v;
}

// Random SPD matrix with eigenvalues in [lo, hi].
inline Matrix random_spd(std::mt19937_64& rng, Index d, double lo = 0.5, double hi = 3.0) {
  Matrix g = random_matrix(rng, d, d);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  std::uniform_real_distribution<double> u(lo, hi);
  Vector eigs(d);
  for (Index i = 0; i < d; ++i) eigs(i) = u(rng);
  return koopgauss::symmetrized(q * eigs.asDiagonal() * q.transpose());
}

// Random controllable Hurwitz pair: shift a random A left of the imaginary
// axis, then rejection-sample B until the Kalman rank is full.
inline koopgauss::LinearSDE random_system(std::mt19937_64& rng, Index d) {
  std::uniform_real_distribution<double> margin(0.3, 1.2);
  std::uniform_int_distribution<int> cols(1, static_cast<int>(d));
  for (int attempt = 0; attempt < 200; ++attempt) {
    Matrix a = random_matrix(rng, d, d);
    // Unit-scale drift: keeps e^{-At} well-conditioned over long horizons.
    a /= std::max(1.0, a.norm());
    double top = koopgauss::spectral_abscissa_eig(a).real();
    a -= (top + margin(rng)) * Matrix::Identity(d, d);
    Matrix b = random_matrix(rng, d, cols(rng));
    if (koopgauss::controllability_rank(a, b) != d) continue;
    return koopgauss::LinearSDE(a, b);
  }
  throw std::runtime_error("random_system: rejection sampling failed");
}

// C = alpha * Sigma^{1/2} always satisfies the invariance inequality.
inline koopgauss::Covariance certified_covariance(std::mt19937_64& rng,
                                                  const koopgauss::LinearSDE& sys) {
  std::uniform_real_distribution<double> u(0.5, 2.0);
  return koopgauss::Covariance(u(rng) * koopgauss::sym_sqrt(sys.sigma_inf()));
}

inline koopgauss::SpanElement random_span(std::mt19937_64& rng, koopgauss::Covariance cov,
                                          int max_centers = 5) {
  std::uniform_int_distribution<int> count(1, max_centers);
  std::uniform_real_distribution<double> coeff(-1.0, 1.0);
  int n = count(rng);
  std::vector<Vector> centers;
  Vector coeffs(n);
  for (int j = 0; j < n; ++j) {
    centers.push_back(random_vector(rng, cov.dim()));
    coeffs(j) = coeff(rng);
  }
  return koopgauss::SpanElement(std::move(cov), std::move(centers), std::move(coeffs));
}

// Truncated-Taylor exponential, accurate for ||M|| <= 1; an oracle kept
// deliberately independent of the production path.
inline Matrix taylor_expm(const Matrix& m) {
  Matrix acc = Matrix::Identity(m.rows(), m.cols());
  Matrix term = acc;
  for (int k = 1; k <= 40; ++k) {
    term = term * m / static_cast<double>(k);
    acc += term;
  }
  return acc;
}

// Composite-Simpson value of int_0^t e^{As} Q e^{A^T s} ds with n (even)
// intervals.
inline Matrix simpson_gramian(const Matrix& a, const Matrix& q, double t, int n) {
  if (n % 2 != 0) ++n;
  double h = t / n;
  auto integrand = [&](double s) {
    Matrix e = koopgauss::matrix_exp(a, s);
    return Matrix(e * q * e.transpose());
  };
  Matrix acc = integrand(0.0) + integrand(t);
  for (int k = 1; k < n; ++k) acc += (k % 2 == 1 ? 4.0 : 2.0) * integrand(h * k);
  return koopgauss::symmetrized(acc * (h / 3.0));
}

// Refines Simpson until two consecutive levels agree.
inline Matrix simpson_gramian_adaptive(const Matrix& a, const Matrix& q, double t,
                                       double tol = 1e-11) {
  Matrix prev = simpson_gramian(a, q, t, 64);
  for (int n = 128; n <= (1 << 18); n *= 2) {
    Matrix cur = simpson_gramian(a, q, t, n);
    if (rel_err(cur, prev) < tol) return cur;
    prev = cur;
  }
  return prev;
}

// Bisection oracle for max_scale_tau on lambda_min(BB^T - u * S).
inline double bisect_max_scale(const Matrix& a, const Matrix& b, const Matrix& c) {
  Matrix c2 = koopgauss::symmetrized(c * c);
  Matrix s = koopgauss::symmetrized(0.5 * (a * c2 + c2 * a.transpose()));
  Matrix w = koopgauss::symmetrized(b * b.transpose());
  double lo = 0.0, hi = 1.0;
  while (koopgauss::psd_slack(w - hi * s) >= 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e18) return std::numeric_limits<double>::infinity();
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (koopgauss::psd_slack(w - mid * s) >= 0.0 ? lo : hi) = mid;
  }
  return std::sqrt(0.5 * (lo + hi));
}

// 0.999 quantile of the chi-squared law with 49 degrees of freedom; the
// histogram tests compare their statistic against it.
inline constexpr double kChi2Crit49 = 85.35056460859305;

// Chi-squared statistic of 1-D samples against a Gaussian(mu, var) over
// nbins bins: equal-width interior bins on +-4 sigma plus two tails.
inline double gaussian_chi2_stat(const std::vector<double>& samples, double mu, double var,
                                 int nbins) {
  double sd = std::sqrt(var);
  double lo = mu - 4.0 * sd;
  double hi = mu + 4.0 * sd;
  int interior = nbins - 2;
  double width = (hi - lo) / interior;
  std::vector<double> observed(static_cast<std::size_t>(nbins), 0.0);
  for (double s : samples) {
    int bin;
    if (s < lo)
      bin = 0;
    else if (s >= hi)
      bin = nbins - 1;
    else
      bin = 1 + std::min(interior - 1, static_cast<int>((s - lo) / width));
    observed[static_cast<std::size_t>(bin)] += 1.0;
  }
  auto cdf = [&](double x) { return 0.5 * std::erfc(-(x - mu) / (sd * std::sqrt(2.0))); };
  double n = static_cast<double>(samples.size());
  double stat = 0.0;
  for (int b = 0; b < nbins; ++b) {
    double p;
    if (b == 0)
      p = cdf(lo);
    else if (b == nbins - 1)
      p = 1.0 - cdf(hi);
    else
      p = cdf(lo + width * b) - cdf(lo + width * (b - 1));
    double expected = n * p;
    double diff = observed[static_cast<std::size_t>(b)] - expected;
    stat += diff * diff / expected;
  }
  return stat;
}

struct CliResult {
  int exit_code = -1;
  std::string out;
};

// Runs the CLI binary through the shell and captures stdout.
inline CliResult run_cli(const std::string& cli_path, const std::vector<std::string>& args) {
  CliResult res;
  std::string cmd = "'" + cli_path + "'";
  for (const auto& a : args) cmd += " '" + a + "'";
  cmd += " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("run_cli: popen failed");
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) res.out.append(buf, got);
  int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

}  // namespace kgtest
