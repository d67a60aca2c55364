#include <doctest.h>

#include "oracles.hpp"
#include "sitegp/chain.hpp"

using namespace sitegp;

TEST_CASE("discretize: scalar example and stationary consistency") {
  LtiSde sde = to_state_space(KernelSpec::matern12(1.0, 2.0));
  InducingGrid grid = InducingGrid::from_points(VectorXd::LinSpaced(3, 0, 2));
  MarkovChain chain = discretize(sde, grid);
  CHECK(chain.A[0](0, 0) == doctest::Approx(std::exp(-0.5)));
  CHECK(chain.Q[0](0, 0) == doctest::Approx(1.0 - std::exp(-1.0)));
  for (int m = 0; m < chain.segments(); ++m) {
    MatrixXd resid = chain.Q[m] -
                     (sde.P0 - chain.A[m] * sde.P0 * chain.A[m].transpose());
    CHECK(resid.cwiseAbs().maxCoeff() <= 1e-10 * sde.P0.norm());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(chain.Q[m]));
    CHECK(es.eigenvalues().minCoeff() >= -1e-12 * sde.P0.norm());
  }
}

TEST_CASE("discretized noise matches the transition-integral oracle") {
  // Q from the stationary identity vs high-resolution trapezoid of
  // int_0^D Phi(D - t) L Qc L' Phi(D - t)' dt.
  LtiSde sde = to_state_space(KernelSpec::matern32(1.3, 0.9));
  const double delta = 0.3;
  MatrixXd a = expm(sde.F * delta);
  MatrixXd q_stat = sde.P0 - a * sde.P0 * a.transpose();
  const int steps = 4000;
  MatrixXd lql = sde.L * sde.Qc * sde.L.transpose();
  MatrixXd q_int = MatrixXd::Zero(sde.d, sde.d);
  for (int i = 0; i <= steps; ++i) {
    const double t = delta * i / steps;
    MatrixXd phi = expm(sde.F * (delta - t));
    MatrixXd term = phi * lql * phi.transpose();
    const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
    q_int += w * term * (delta / steps);
  }
  CHECK((q_stat - q_int).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("state conditional at the segment endpoints is a selector") {
  LtiSde sde = to_state_space(KernelSpec::matern52(1.0, 1.0));
  InducingGrid grid = InducingGrid::from_points(VectorXd::LinSpaced(4, 0, 3));
  MarkovChain chain = discretize(sde, grid);
  StateConditional left = state_conditional(chain, 1, 1.0);
  CHECK((left.R.leftCols(sde.d) - MatrixXd::Identity(sde.d, sde.d)).norm() ==
        0.0);
  CHECK(left.R.rightCols(sde.d).norm() == 0.0);
  CHECK(left.T.norm() == 0.0);
  StateConditional right = state_conditional(chain, 1, 2.0);
  CHECK((right.R.rightCols(sde.d) - MatrixXd::Identity(sde.d, sde.d)).norm() ==
        0.0);
  CHECK(right.T.norm() == 0.0);
  CHECK_THROWS_AS(state_conditional(chain, 1, 2.5), SegmentError);
}

TEST_CASE("state conditional matches dense Schur-complement oracle") {
  Rng rng(5);
  for (const auto& spec :
       {KernelSpec::matern12(1.0, 1.0), KernelSpec::matern32(0.8, 0.7),
        KernelSpec::matern52(1.2, 1.5)}) {
    LtiSde sde = to_state_space(spec);
    const int d = sde.d;
    InducingGrid grid = InducingGrid::from_points(VectorXd::LinSpaced(2, 0, 1));
    MarkovChain chain = discretize(sde, grid);
    for (int trial = 0; trial < 5; ++trial) {
      const double x = rng.uniform(0.05, 0.95);
      StateConditional sc = state_conditional(chain, 0, x);
      // Dense conditioning of s(x) on (u_0, u_1) from the stationary joint.
      VectorXd pts(3);
      pts << 0.0, x, 1.0;
      MatrixXd joint = oracle::dense_state_prior(sde, pts);
      MatrixXd svv(2 * d, 2 * d);
      svv.topLeftCorner(d, d) = joint.block(0, 0, d, d);
      svv.topRightCorner(d, d) = joint.block(0, 2 * d, d, d);
      svv.bottomLeftCorner(d, d) = joint.block(2 * d, 0, d, d);
      svv.bottomRightCorner(d, d) = joint.block(2 * d, 2 * d, d, d);
      MatrixXd ssv(d, 2 * d);
      ssv.leftCols(d) = joint.block(d, 0, d, d);
      ssv.rightCols(d) = joint.block(d, 2 * d, d, d);
      MatrixXd r_dense = ssv * svv.ldlt().solve(
                                   MatrixXd::Identity(2 * d, 2 * d));
      MatrixXd t_dense =
          joint.block(d, d, d, d) - r_dense * ssv.transpose();
      CHECK((sc.R - r_dense).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((sc.T - t_dense).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("two-stage state conditional composes to the single-stage answer") {
  // Splitting the segment at x and conditioning stagewise must agree with
  // the direct conditional (compositionality of the Markov prior).
  LtiSde sde = to_state_space(KernelSpec::matern32(1.0, 1.0));
  InducingGrid wide = InducingGrid::from_points(VectorXd::LinSpaced(2, 0, 2));
  MarkovChain chain = discretize(sde, wide);
  const double x = 0.77;
  StateConditional direct = state_conditional(chain, 0, x);
  // Oracle via dense prior over (u_0, s(x), u_1): already covered above;
  // here check the marginal-consistency property instead: prior variance of
  // the reconstruction equals P0.
  MatrixXd w = direct.R;
  MatrixXd joint(2 * sde.d, 2 * sde.d);
  joint.topLeftCorner(sde.d, sde.d) = sde.P0;
  MatrixXd a = chain.A[0];
  joint.topRightCorner(sde.d, sde.d) = sde.P0 * a.transpose();
  joint.bottomLeftCorner(sde.d, sde.d) = a * sde.P0;
  joint.bottomRightCorner(sde.d, sde.d) = sde.P0;
  MatrixXd recon = w * joint * w.transpose() + direct.T;
  CHECK((recon - sde.P0).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("function conditional: marginal consistency of f(x)") {
  for (const auto& spec :
       {KernelSpec::matern52(2.0, 1.3), KernelSpec::matern72(1.0, 0.8)}) {
    LtiSde sde = to_state_space(spec);
    InducingGrid grid = InducingGrid::from_points(VectorXd::LinSpaced(3, 0, 4));
    MarkovChain chain = discretize(sde, grid);
    FunctionConditional fc = function_conditional(chain, 0, 1.234);
    MatrixXd joint(2 * sde.d, 2 * sde.d);
    joint.topLeftCorner(sde.d, sde.d) = sde.P0;
    joint.topRightCorner(sde.d, sde.d) = sde.P0 * chain.A[0].transpose();
    joint.bottomLeftCorner(sde.d, sde.d) = chain.A[0] * sde.P0;
    joint.bottomRightCorner(sde.d, sde.d) = sde.P0;
    MatrixXd var = fc.W * joint * fc.W.transpose() + fc.nu;
    CHECK(var(0, 0) == doctest::Approx(kernel_eval(spec, 0.0)).epsilon(1e-9));
  }
}

TEST_CASE("function conditional mean matches dense GP conditional") {
  KernelSpec spec = KernelSpec::matern52(1.0, 1.0);
  LtiSde sde = to_state_space(spec);
  InducingGrid grid = InducingGrid::from_points(VectorXd::LinSpaced(2, 0, 1));
  MarkovChain chain = discretize(sde, grid);
  FunctionConditional fc = function_conditional(chain, 0, 0.4);
  // Compare against Schur complement on the state joint (function view).
  VectorXd pts(3);
  pts << 0.0, 0.4, 1.0;
  MatrixXd joint = oracle::dense_state_prior(sde, pts);
  const int d = sde.d;
  Rng rng(23);
  for (int t = 0; t < 10; ++t) {
    VectorXd v(2 * d);
    for (int i = 0; i < 2 * d; ++i) v(i) = rng.normal();
    MatrixXd svv(2 * d, 2 * d);
    svv.topLeftCorner(d, d) = joint.block(0, 0, d, d);
    svv.topRightCorner(d, d) = joint.block(0, 2 * d, d, d);
    svv.bottomLeftCorner(d, d) = joint.block(2 * d, 0, d, d);
    svv.bottomRightCorner(d, d) = joint.block(2 * d, 2 * d, d, d);
    Eigen::RowVectorXd kfv(2 * d);
    kfv.head(d) = (sde.H * joint.block(d, 0, d, d)).row(0);
    kfv.tail(d) = (sde.H * joint.block(d, 2 * d, d, d)).row(0);
    const double dense_mean = kfv * svv.ldlt().solve(v);
    const double fast_mean = (fc.W * v)(0);
    CHECK(fast_mean == doctest::Approx(dense_mean).epsilon(1e-9));
  }
}

TEST_CASE("independent stack conditional has block structure") {
  auto stack = KernelSpec::stack(
      {KernelSpec::matern32(1.0, 1.0), KernelSpec::matern12(1.0, 1.0)});
  LtiSde sde = to_state_space(stack);
  InducingGrid grid = InducingGrid::from_points(VectorXd::LinSpaced(2, 0, 1));
  MarkovChain chain = discretize(sde, grid);
  FunctionConditional fc = function_conditional(chain, 0, 0.5);
  CHECK(fc.W.rows() == 2);
  CHECK(fc.W.cols() == 2 * sde.d);
  CHECK(fc.nu.rows() == 2);
  // Off-diagonal residual covariance vanishes for independent latents.
  CHECK(std::abs(fc.nu(0, 1)) < 1e-12);
  // Latent 0 weight on latent 1 state blocks is zero: columns 2..2 (m12
  // block inside u_0) and mirrored in u_1.
  CHECK(std::abs(fc.W(0, 2)) < 1e-12);
  CHECK(std::abs(fc.W(1, 0)) < 1e-12);
}

TEST_CASE("assign_segments: edges, counts, brute-force scan") {
  InducingGrid grid = InducingGrid::from_points(VectorXd::LinSpaced(6, 0, 10));
  Rng rng(31);
  const int n = 500;
  VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = rng.uniform(0.0, 10.0);
  x(0) = 0.0;
  x(n - 1) = 10.0;  // exact right edge
  std::sort(x.data(), x.data() + n);
  SegmentAssignment sa = assign_segments(x, grid);
  CHECK(sa.segment.front() == 0);
  CHECK(sa.segment.back() == 4);  // z_M lands in the last segment
  CHECK(sa.right_edge.back());
  int total = 0;
  for (int c : sa.count) total += c;
  CHECK(total == n);
  // O(N M) scan oracle.
  for (int i = 0; i < n; ++i) {
    int expect = -1;
    for (int m = 0; m + 1 < grid.size(); ++m) {
      if (x(i) >= grid.z(m) && x(i) < grid.z(m + 1)) expect = m;
    }
    if (x(i) == grid.z(grid.size() - 1)) expect = grid.size() - 2;
    CHECK(sa.segment[i] == expect);
  }
  CHECK_THROWS_AS(assign_segments(VectorXd::Constant(1, 11.0), grid),
                  CoverageError);
}

TEST_CASE("grid builder spans data inclusively") {
  VectorXd x(4);
  x << 1.0, 2.0, 5.0, 9.0;
  InducingGrid g = InducingGrid::spanning(x, 5);
  CHECK(g.z(0) == doctest::Approx(1.0));
  CHECK(g.z(4) == doctest::Approx(9.0));
  CHECK(g.size() == 5);
  CHECK_THROWS_AS(InducingGrid::from_points(VectorXd::Constant(2, 1.0)),
                  ParameterError);
}
