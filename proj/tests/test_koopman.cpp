#include "helpers.hpp"

#include "koopgauss/koopman.hpp"
#include "koopgauss/oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

using namespace koopgauss;
using kgtest::rel_err;

static LinearSDE scalar_system() {
  Matrix a(1, 1), b(1, 1);
  a << -1.0;
  b << 1.0;
  return LinearSDE(a, b);
}

static SpanElement scalar_k0() {
  return SpanElement(Covariance(Matrix::Identity(1, 1)), {Vector::Zero(1)},
                     Vector::Ones(1));
}

TEST_CASE("certificate known examples", "[koopman]") {
  Matrix a = Matrix::Zero(2, 2);
  a.diagonal() << -1.0, -2.0;
  LinearSDE diag_sys(a, Matrix::Identity(2, 2));
  Certificate good = certificate(diag_sys, Covariance(Matrix::Identity(2, 2)));
  CHECK(rel_err(good.slack, 2.0) < 1e-14);
  CHECK(good.holds);

  Matrix shear(2, 2);
  shear << -1.0, 10.0, 0.0, -1.0;
  LinearSDE shear_sys(shear, 0.1 * Matrix::Identity(2, 2));
  Certificate bad = certificate(shear_sys, Covariance(Matrix::Identity(2, 2)));
  CHECK(rel_err(bad.slack, -3.99) < 1e-12);
  CHECK_FALSE(bad.holds);
}

TEST_CASE("scaled stationary root always certifies", "[koopman]") {
  std::mt19937_64 rng(401);
  for (int trial = 0; trial < 15; ++trial) {
    Index d = 1 + trial % 4;
    LinearSDE sys = kgtest::random_system(rng, d);
    Covariance cov = kgtest::certified_covariance(rng, sys);
    Certificate cert = certificate(sys, cov);
    CHECK(cert.slack >= -psd_tolerance(cert.matrix));
    CHECK(cert.holds);
  }
}

TEST_CASE("propagate identity at t = 0 and scalar golden values", "[koopman]") {
  LinearSDE sys = scalar_system();
  SpanElement f = scalar_k0();

  KoopmanImage at_zero = propagate(sys, f, 0.0);
  CHECK(at_zero.tau == 1.0);
  CHECK(at_zero.cov_t.matrix() == f.cov.matrix());
  CHECK(at_zero.centers[0] == f.centers[0]);

  KoopmanImage img = propagate(sys, f, 0.5);
  CHECK(rel_err(img.tau, 0.78275145274875219) < 1e-13);
  CHECK(rel_err(img.cov_t.matrix()(0, 0), 2.1063151846098652) < 1e-13);
  CHECK(std::abs(img.centers[0](0)) < 1e-300);
  CHECK(img.horizon == 0.5);

  CHECK_THROWS_AS(propagate(sys, f, -0.1), std::domain_error);
}

TEST_CASE("image_eval values and bound", "[koopman]") {
  LinearSDE sys = scalar_system();
  SpanElement f = scalar_k0();
  KoopmanImage img = propagate(sys, f, 0.5);
  CHECK(rel_err(image_eval(img, Vector::Zero(1)), 0.78275145274875219) < 1e-13);

  KoopmanImage ident = propagate(sys, f, 0.0);
  std::mt19937_64 rng(402);
  for (int i = 0; i < 10; ++i) {
    Vector x = kgtest::random_vector(rng, 1);
    CHECK(image_eval(ident, x) == f.eval(x));
    CHECK(std::abs(image_eval(img, x)) <=
          img.tau * img.coeffs.cwiseAbs().sum() * (1.0 + 1e-15));
  }
}

TEST_CASE("image matches Monte Carlo pointwise", "[koopman]") {
  std::mt19937_64 rng(403);
  for (int trial = 0; trial < 3; ++trial) {
    Index d = 1 + trial;
    LinearSDE sys = kgtest::random_system(rng, d);
    SpanElement f = kgtest::random_span(rng, Covariance(kgtest::random_spd(rng, d)));
    double t = 0.5;
    Vector x = kgtest::random_vector(rng, d);
    double closed = image_eval(propagate(sys, f, t), x);
    MCEstimate est = mc_koopman(sys, f, t, x, 100000, 7000 + trial);
    CHECK(std::abs(closed - est.mean) <= 3.0 * est.std_error);
  }
}

TEST_CASE("image_norm_ct and the change-of-variables identity", "[koopman]") {
  LinearSDE sys = scalar_system();
  SpanElement f = scalar_k0();
  KoopmanImage img = propagate(sys, f, 0.5);
  CHECK(rel_err(image_norm_ct(img), 0.78275145274875219) < 1e-13);
  CHECK(rel_err(image_norm_ct(propagate(sys, f, 0.0)), rkhs_norm(f)) < 1e-15);

  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> horizon(0.05, 2.5);
  for (int trial = 0; trial < 12; ++trial) {
    Index d = 1 + trial % 3;
    LinearSDE rsys = kgtest::random_system(rng, d);
    SpanElement rf =
        kgtest::random_span(rng, Covariance(kgtest::random_spd(rng, d)), 10);
    KoopmanImage rimg = propagate(rsys, rf, horizon(rng));
    NormRouteReport routes = image_norm_routes(rsys, rf, rimg);
    CHECK(routes.rel_deviation < 1e-10);
  }
}

TEST_CASE("tau stays in (0, 1] and decreases; determinant identity holds", "[koopman]") {
  std::mt19937_64 rng(405);
  for (int trial = 0; trial < 10; ++trial) {
    Index d = 1 + trial % 4;
    LinearSDE sys = kgtest::random_system(rng, d);
    Covariance cov(kgtest::random_spd(rng, d));
    SpanElement f(cov, {Vector::Zero(d)}, Vector::Ones(1));

    double trace = sys.A().trace();
    double prev_tau = 1.0 + 1e-15;
    for (int k = 20; k >= 0; --k) {
      double t = 5.0 * std::pow(2.0, -k);
      KoopmanImage img = propagate(sys, f, t);
      CHECK(img.tau > 0.0);
      CHECK(img.tau <= 1.0 + 1e-12);
      CHECK(img.tau <= prev_tau * (1.0 + 1e-12));
      prev_tau = img.tau;

      double lhs = img.tau * std::exp(img.cov_t.logdet() - cov.logdet());
      CHECK(rel_err(lhs, std::exp(-t * trace)) < 1e-10);
    }
  }
}

TEST_CASE("Prop 4.1 norm contraction needs no certificate", "[koopman]") {
  std::mt19937_64 rng(406);
  std::uniform_real_distribution<double> horizon(0.0, 3.0);
  for (int trial = 0; trial < 15; ++trial) {
    Index d = 1 + trial % 3;
    LinearSDE sys = kgtest::random_system(rng, d);
    SpanElement f = kgtest::random_span(rng, Covariance(kgtest::random_spd(rng, d)));
    KoopmanImage img = propagate(sys, f, horizon(rng));
    CHECK(image_norm_ct(img) <= std::sqrt(img.tau) * rkhs_norm(f) + 1e-10);
  }
}

TEST_CASE("C_t ordering tracks the certificate", "[koopman]") {
  Matrix a = Matrix::Zero(2, 2);
  a.diagonal() << -1.0, -2.0;
  LinearSDE good_sys(a, Matrix::Identity(2, 2));
  Covariance eye(Matrix::Identity(2, 2));
  SpanElement f(eye, {Vector::Zero(2)}, Vector::Ones(1));
  Matrix c2 = eye.matrix() * eye.matrix();
  for (int k = 0; k <= 20; ++k) {
    double t = 5.0 * std::pow(2.0, -k);
    KoopmanImage img = propagate(good_sys, f, t);
    Matrix diff = img.cov_t.matrix() * img.cov_t.matrix() - c2;
    CHECK(psd_slack(diff) >= -1e-9);
  }

  Matrix shear(2, 2);
  shear << -1.0, 10.0, 0.0, -1.0;
  LinearSDE bad_sys(shear, 0.1 * Matrix::Identity(2, 2));
  REQUIRE(certificate(bad_sys, eye).slack < -1e-6);
  bool found_violation = false;
  for (int k = 0; k <= 20 && !found_violation; ++k) {
    double t = std::pow(2.0, -k);
    KoopmanImage img = propagate(bad_sys, f, t);
    Matrix diff = img.cov_t.matrix() * img.cov_t.matrix() - c2;
    if (psd_slack(diff) < 0.0) found_violation = true;
  }
  CHECK(found_violation);
}

TEST_CASE("norm_bound_report scalar example and certificate gating", "[koopman]") {
  LinearSDE sys = scalar_system();
  SpanElement f = scalar_k0();
  NormBoundReport rep = norm_bound_report(sys, f, 0.5);
  CHECK(rel_err(rep.upper_proxy, 1.1360189126147038) < 1e-12);
  CHECK(rel_err(rep.bound, 1.2840254166877415) < 1e-12);
  CHECK(rel_err(rep.det_identity_lhs, rep.det_identity_rhs) < 1e-12);
  CHECK(rel_err(rep.det_identity_rhs, 1.6487212707001281) < 1e-12);
  CHECK(rep.verified);
  CHECK(rep.chain_ok);

  NormBoundReport at_zero = norm_bound_report(sys, f, 0.0);
  CHECK(rel_err(at_zero.upper_proxy, at_zero.norm_f) < 1e-14);
  CHECK(rel_err(at_zero.bound, at_zero.norm_f) < 1e-14);

  Matrix shear(2, 2);
  shear << -1.0, 10.0, 0.0, -1.0;
  LinearSDE bad_sys(shear, 0.1 * Matrix::Identity(2, 2));
  Covariance eye(Matrix::Identity(2, 2));
  SpanElement g(eye, {Vector::Zero(2)}, Vector::Ones(1));
  CHECK_THROWS_AS(norm_bound_report(bad_sys, g, 0.5), CertificateError);
  NormBoundReport forced = norm_bound_report(bad_sys, g, 0.5, true);
  CHECK_FALSE(forced.verified);
}

TEST_CASE("norm chain holds on random certified cases", "[koopman]") {
  std::mt19937_64 rng(407);
  std::uniform_real_distribution<double> horizon(0.0, 3.0);
  for (int trial = 0; trial < 15; ++trial) {
    Index d = 1 + trial % 3;
    LinearSDE sys = kgtest::random_system(rng, d);
    SpanElement f = kgtest::random_span(rng, kgtest::certified_covariance(rng, sys));
    NormBoundReport rep = norm_bound_report(sys, f, horizon(rng));
    CHECK(rep.verified);
    CHECK(rep.chain_ok);
    CHECK(rep.route_deviation < 1e-10);
  }
}

TEST_CASE("fx_curve values and derivative", "[koopman]") {
  LinearSDE sys = scalar_system();
  Covariance one(Matrix::Identity(1, 1));
  Vector x = Vector::Ones(1);

  FxPoint base = fx_curve(sys, one, x, 0.0);
  CHECK(rel_err(base.value, 1.0) < 1e-14);
  CHECK(rel_err(base.derivative, 4.0) < 1e-14);

  FxPoint mid = fx_curve(sys, one, x, 0.5);
  CHECK(rel_err(mid.value, 2.0 * std::exp(1.0) - 1.0) < 1e-13);
  CHECK(rel_err(mid.derivative, 4.0 * std::exp(1.0)) < 1e-13);

  std::mt19937_64 rng(408);
  for (int trial = 0; trial < 10; ++trial) {
    Index d = 1 + trial % 3;
    LinearSDE rsys = kgtest::random_system(rng, d);
    Covariance cov(kgtest::random_spd(rng, d));
    Vector dir = kgtest::random_vector(rng, d);
    double t = 0.3 + 0.15 * trial;
    auto value_at = [&](double s) { return fx_curve(rsys, cov, dir, s).value; };
    double fd = fd_derivative(value_at, t, 1e-5);
    CHECK(rel_err(fd, fx_curve(rsys, cov, dir, t).derivative) < 1e-4);
  }
}

TEST_CASE("certificate sign matches the derivative sign at zero", "[koopman]") {
  std::mt19937_64 rng(409);
  int tested = 0;
  for (int trial = 0; trial < 40 && tested < 20; ++trial) {
    Index d = 1 + trial % 4;
    LinearSDE sys = kgtest::random_system(rng, d);
    Covariance cov(kgtest::random_spd(rng, d));
    Certificate cert = certificate(sys, cov);
    if (std::abs(cert.slack) <= 1e-6) continue;
    ++tested;

    Eigen::SelfAdjointEigenSolver<Matrix> es(cert.matrix);
    double min_deriv = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < d; ++i) {
      Vector dir = es.eigenvectors().col(i);
      min_deriv = std::min(min_deriv, fx_curve(sys, cov, dir, 0.0).derivative);
    }
    CHECK(rel_err(min_deriv, 2.0 * cert.slack) < 1e-9);
    CHECK((min_deriv > 0.0) == (cert.slack > 0.0));
  }
  CHECK(tested == 20);
}

TEST_CASE("fx value is monotone when the certificate holds", "[koopman]") {
  std::mt19937_64 rng(410);
  for (int trial = 0; trial < 8; ++trial) {
    Index d = 1 + trial % 3;
    LinearSDE sys = kgtest::random_system(rng, d);
    Covariance cov = kgtest::certified_covariance(rng, sys);
    Vector x = kgtest::random_vector(rng, d);
    double base = fx_curve(sys, cov, x, 0.0).value;
    for (int k = 20; k >= 0; --k) {
      double t = 5.0 * std::pow(2.0, -k);
      CHECK(fx_curve(sys, cov, x, t).value >= base - 1e-9 * std::max(1.0, base));
    }
  }
}

TEST_CASE("semigroup composition", "[koopman]") {
  LinearSDE sys = scalar_system();
  SpanElement f = scalar_k0();

  SemigroupReport trivial = semigroup_check(sys, f, 0.7, 0.0);
  CHECK(trivial.max_rel_dev < 1e-12);

  SemigroupReport scalar = semigroup_check(sys, f, 0.25, 0.25);
  CHECK(scalar.max_rel_dev < 1e-12);

  std::mt19937_64 rng(411);
  std::uniform_real_distribution<double> horizon(0.0, 2.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Index d = 1 + trial % 4;
    LinearSDE rsys = kgtest::random_system(rng, d);
    SpanElement rf = kgtest::random_span(rng, Covariance(kgtest::random_spd(rng, d)));
    SemigroupReport rep = semigroup_check(rsys, rf, horizon(rng), horizon(rng));
    worst = std::max(worst, rep.max_rel_dev);
  }
  CHECK(worst <= 1e-9);
}
