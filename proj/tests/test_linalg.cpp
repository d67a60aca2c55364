#include <doctest.h>

#include "sitegp/linalg.hpp"
#include "sitegp/rng.hpp"

using namespace sitegp;

TEST_CASE("expm matches scalar exponential") {
  for (double a : {-3.0, -0.2, 0.0, 1.7}) {
    MatrixXd m = MatrixXd::Constant(1, 1, a);
    CHECK(expm(m)(0, 0) == doctest::Approx(std::exp(a)).epsilon(1e-13));
  }
}

TEST_CASE("expm of nilpotent block is exact polynomial") {
  MatrixXd n = MatrixXd::Zero(3, 3);
  n(0, 1) = 2.0;
  n(1, 2) = -1.0;
  // exp(N) = I + N + N^2/2 for N^3 = 0.
  MatrixXd expected = MatrixXd::Identity(3, 3) + n + 0.5 * n * n;
  CHECK((expm(n) - expected).norm() < 1e-14);
}

TEST_CASE("expm additivity and large-norm scaling") {
  Rng rng(7);
  MatrixXd a(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = rng.normal();
  a *= 9.0;  // force several squaring steps
  MatrixXd full = expm(a);
  MatrixXd halves = expm(a * 0.5) * expm(a * 0.5);
  CHECK((full - halves).norm() / full.norm() < 1e-11);
}

TEST_CASE("lyapunov solve: scalar balances") {
  MatrixXd f = MatrixXd::Constant(1, 1, -1.0);
  MatrixXd s = MatrixXd::Constant(1, 1, 2.0);
  CHECK(solve_lyapunov(f, s)(0, 0) == doctest::Approx(1.0));
  f(0, 0) = -0.5;
  s(0, 0) = 1.0;
  CHECK(solve_lyapunov(f, s)(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("lyapunov residual small on random stable systems") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 2 + static_cast<int>(rng.uniform() * 3);
    MatrixXd f(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) f(i, j) = rng.normal();
    f -= (f.cwiseAbs().rowwise().sum().maxCoeff() + 1.0) *
         MatrixXd::Identity(d, d);
    MatrixXd b(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) b(i, j) = rng.normal();
    MatrixXd s = b * b.transpose();
    MatrixXd p = solve_lyapunov(f, s);
    MatrixXd resid = f * p + p * f.transpose() + s;
    CHECK(resid.cwiseAbs().maxCoeff() <=
          1e-8 * p.cwiseAbs().maxCoeff() + 1e-12);
  }
}

TEST_CASE("lyapunov rejects unstable feedback") {
  MatrixXd f = MatrixXd::Constant(1, 1, 0.5);
  MatrixXd s = MatrixXd::Identity(1, 1);
  CHECK_THROWS_AS(solve_lyapunov(f, s), StabilityError);
}

TEST_CASE("jittered cholesky rescues a semidefinite matrix") {
  MatrixXd a = MatrixXd::Zero(2, 2);
  a(0, 0) = 1.0;  // rank one
  auto llt = cholesky_jittered(a);
  CHECK(llt.info() == Eigen::Success);
  MatrixXd bad = -MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(cholesky_jittered(bad), NotPositiveDefiniteError);
}

TEST_CASE("gaussian natural/moment round trip") {
  Rng rng(11);
  MatrixXd b(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) b(i, j) = rng.normal();
  Gaussian g;
  g.cov = b * b.transpose() + MatrixXd::Identity(3, 3);
  g.mean = VectorXd::LinSpaced(3, -1.0, 1.0);
  Gaussian back = Gaussian::from_natural(g.h(), g.precision());
  CHECK((back.mean - g.mean).norm() < 1e-10);
  CHECK((back.cov - g.cov).norm() < 1e-10);
}

TEST_CASE("log_partition matches direct gaussian integral") {
  // exp(h v - 1/2 J v^2) integrates to sqrt(2 pi / J) exp(h^2 / (2 J)).
  VectorXd h = VectorXd::Constant(1, 0.7);
  MatrixXd j = MatrixXd::Constant(1, 1, 2.5);
  const double expected =
      0.5 * std::log(2.0 * M_PI / 2.5) + 0.7 * 0.7 / (2.0 * 2.5);
  CHECK(log_partition(h, j) == doctest::Approx(expected).epsilon(1e-12));
}
