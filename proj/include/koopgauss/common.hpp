#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace koopgauss {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Dense desk-scale algorithms only.
inline constexpr Index kMaxDim = 64;

// S counts as PSD iff lambda_min(S) >= -kPsdTol * max(1, ||S||_2).
inline constexpr double kPsdTol = 1e-10;

struct NotPsdError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IllPosedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedCaseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SamplingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotControllableError : std::runtime_error {
  NotControllableError(const std::string& what, Index rank_found)
      : std::runtime_error(what), rank(rank_found) {}
  Index rank;
};

struct NotHurwitzError : std::runtime_error {
  NotHurwitzError(const std::string& what, std::complex<double> offending)
      : std::runtime_error(what), eigenvalue(offending) {}
  std::complex<double> eigenvalue;
};

struct CertificateError : std::runtime_error {
  CertificateError(const std::string& what, double slack_value)
      : std::runtime_error(what), slack(slack_value) {}
  double slack;
};

inline void require_square(const Matrix& m, const char* who) {
  if (m.rows() != m.cols())
    throw std::invalid_argument(std::string(who) + ": matrix must be square, got " +
                                std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

inline void require_finite(const Matrix& m, const char* who) {
  if (!m.allFinite())
    throw std::invalid_argument(std::string(who) + ": matrix has non-finite entries");
}

inline void require_dim_cap(Index d, const char* who) {
  if (d < 1 || d > kMaxDim)
    throw std::invalid_argument(std::string(who) + ": dimension " + std::to_string(d) +
                                " outside [1, " + std::to_string(kMaxDim) + "]");
}

inline void require_same_size(const Vector& x, const Vector& y, const char* who) {
  if (x.size() != y.size())
    throw std::invalid_argument(std::string(who) + ": vector dimensions differ (" +
                                std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
}

// Exact symmetrization; applied before every eigen-routine because products
// like A*C^2 + C^2*A^T are symmetric in exact arithmetic only.
inline Matrix symmetrized(const Matrix& s) {
  return 0.5 * (s + s.transpose());
}

}  // namespace koopgauss
