#include "sitegp/chain.hpp"

#include <algorithm>
#include <cmath>

namespace sitegp {

InducingGrid InducingGrid::from_points(VectorXd z) {
  if (z.size() < 2) throw ParameterError("inducing grid needs M >= 2");
  for (int i = 0; i + 1 < z.size(); ++i) {
    if (!(z(i) < z(i + 1))) {
      throw ParameterError("inducing grid must be strictly increasing");
    }
  }
  InducingGrid g;
  g.z = std::move(z);
  return g;
}

InducingGrid InducingGrid::spanning(const VectorXd& x_sorted, int m) {
  if (x_sorted.size() < 1) throw ParameterError("empty data");
  if (m < 2) throw ParameterError("inducing grid needs M >= 2");
  double lo = x_sorted(0);
  double hi = x_sorted(x_sorted.size() - 1);
  if (!(hi > lo)) {
    // Degenerate span; widen so the grid is valid.
    lo -= 0.5;
    hi += 0.5;
  }
  VectorXd z(m);
  for (int i = 0; i < m; ++i) {
    z(i) = lo + (hi - lo) * static_cast<double>(i) / (m - 1);
  }
  z(m - 1) = hi;
  return from_points(std::move(z));
}

MarkovChain discretize(const LtiSde& sde, const InducingGrid& grid) {
  MarkovChain chain;
  chain.sde = sde;
  chain.grid = grid;
  const int m = grid.size();
  chain.A.reserve(m - 1);
  chain.Q.reserve(m - 1);
  for (int i = 0; i + 1 < m; ++i) {
    const double dz = grid.z(i + 1) - grid.z(i);
    MatrixXd a = expm(sde.F * dz);
    // Stationary identity: exact for stationary priors, no quadrature.
    MatrixXd q = symmetrize(sde.P0 - a * sde.P0 * a.transpose());
    chain.A.push_back(std::move(a));
    chain.Q.push_back(std::move(q));
  }
  return chain;
}

namespace {

// Eigenvalue floor applied before inverting segment noise matrices; tiny
// steps make them near-singular.
MatrixXd floored(const MatrixXd& q, double p0_norm) {
  return floor_eigenvalues(q, 1e-12 * p0_norm);
}

}  // namespace

StateConditional state_conditional(const MarkovChain& chain, int m, double x) {
  const auto& z = chain.grid.z;
  if (m < 0 || m >= chain.segments()) throw SegmentError("segment out of range");
  if (x < z(m) || x > z(m + 1)) {
    throw SegmentError("x outside segment [" + std::to_string(z(m)) + ", " +
                       std::to_string(z(m + 1)) + "]");
  }
  const int d = chain.sde.d;
  StateConditional out;
  if (x == z(m)) {
    out.R = MatrixXd::Zero(d, 2 * d);
    out.R.leftCols(d) = MatrixXd::Identity(d, d);
    out.T = MatrixXd::Zero(d, d);
    return out;
  }
  if (x == z(m + 1)) {
    out.R = MatrixXd::Zero(d, 2 * d);
    out.R.rightCols(d) = MatrixXd::Identity(d, d);
    out.T = MatrixXd::Zero(d, d);
    return out;
  }
  const MatrixXd& p0 = chain.sde.P0;
  const double p0n = p0.norm();
  MatrixXd a1 = expm(chain.sde.F * (x - z(m)));
  MatrixXd q1 = symmetrize(p0 - a1 * p0 * a1.transpose());
  MatrixXd a2 = expm(chain.sde.F * (z(m + 1) - x));
  MatrixXd am = chain.A[m];
  MatrixXd qm = floored(chain.Q[m], p0n);
  auto qm_llt = cholesky_jittered(qm, "segment noise");
  // T = Q1 - Q1 A2' Qm^{-1} A2 Q1 ; R = [A1 - Q1 A2' Qm^{-1} Am , Q1 A2' Qm^{-1}]
  MatrixXd q1a2t = q1 * a2.transpose();
  MatrixXd k = qm_llt.solve(q1a2t.transpose()).transpose();  // Q1 A2' Qm^{-1}
  out.T = symmetrize(q1 - k * a2 * q1);
  out.R = MatrixXd(d, 2 * d);
  out.R.leftCols(d) = a1 - k * am;
  out.R.rightCols(d) = k;
  return out;
}

FunctionConditional function_conditional(const MarkovChain& chain, int m,
                                         double x) {
  StateConditional sc = state_conditional(chain, m, x);
  FunctionConditional fc;
  fc.W = chain.sde.H * sc.R;
  fc.nu = symmetrize(chain.sde.H * sc.T * chain.sde.H.transpose());
  return fc;
}

ForwardConditional forward_conditional(const MarkovChain& chain, int m,
                                       double x) {
  const auto& z = chain.grid.z;
  if (m < 0 || m >= chain.segments()) throw SegmentError("segment out of range");
  if (x < z(m) || x > z(m + 1)) throw SegmentError("x outside segment");
  ForwardConditional fc;
  fc.A = expm(chain.sde.F * (x - z(m)));
  fc.Q = symmetrize(chain.sde.P0 - fc.A * chain.sde.P0 * fc.A.transpose());
  return fc;
}

SegmentAssignment assign_segments(const VectorXd& x_sorted,
                                  const InducingGrid& grid) {
  const int n = static_cast<int>(x_sorted.size());
  const int m = grid.size();
  SegmentAssignment out;
  out.segment.resize(n);
  out.count.assign(m - 1, 0);
  out.count_half_open.assign(m - 1, 0);
  out.left_count.resize(n);
  out.right_edge.resize(n);
  int seg = 0;
  int seg_start = 0;
  for (int i = 0; i < n; ++i) {
    const double x = x_sorted(i);
    if (i > 0 && x < x_sorted(i - 1)) {
      throw ParameterError("inputs must be sorted for segment assignment");
    }
    if (x < grid.z(0) || x > grid.z(m - 1)) {
      throw CoverageError("input " + std::to_string(x) +
                          " outside inducing grid span");
    }
    while (seg + 2 < m && x >= grid.z(seg + 1)) {
      ++seg;
      seg_start = i;
    }
    out.segment[i] = seg;
    out.right_edge[i] = (x == grid.z(seg + 1));
    // Strictly-left data in the same segment; ties at equal x excluded.
    int ties = 0;
    for (int j = i - 1; j >= seg_start && x_sorted(j) == x; --j) ++ties;
    out.left_count[i] = i - seg_start - ties;
    out.count[seg]++;
    if (!out.right_edge[i]) out.count_half_open[seg]++;
  }
  return out;
}

}  // namespace sitegp
