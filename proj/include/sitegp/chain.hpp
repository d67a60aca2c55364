// Discretization of the SDE prior onto the inducing grid: transition
// densities between consecutive inducing states and the closed-form
// conditionals p(s(x) | v_m), p(f(x) | v_m) inside a segment.
#pragma once

#include <vector>

#include "sitegp/kernels.hpp"

namespace sitegp {

struct InducingGrid {
  VectorXd z;  // strictly increasing, size M >= 2

  int size() const { return static_cast<int>(z.size()); }

  // Validate a user-supplied grid.
  static InducingGrid from_points(VectorXd z);
  // M equally spaced points over [min(x), max(x)] inclusive.
  static InducingGrid spanning(const VectorXd& x_sorted, int m);
};

struct MarkovChain {
  LtiSde sde;
  InducingGrid grid;
  std::vector<MatrixXd> A;  // M-1 transitions expm(F dz)
  std::vector<MatrixXd> Q;  // M-1 noise covariances P0 - A P0 A^T
  int segments() const { return static_cast<int>(A.size()); }
};

MarkovChain discretize(const LtiSde& sde, const InducingGrid& grid);

// p(s(x) | u_m, u_{m+1}) = N(R [u_m; u_{m+1}], T).
struct StateConditional {
  MatrixXd R;  // d x 2d
  MatrixXd T;  // d x d, symmetric PSD
};

// p(f(x) | v_m) = N(W v_m, nu).
struct FunctionConditional {
  MatrixXd W;   // o x 2d
  MatrixXd nu;  // o x o
};

StateConditional state_conditional(const MarkovChain& chain, int m, double x);
FunctionConditional function_conditional(const MarkovChain& chain, int m,
                                         double x);

// One-sided transition from the left inducing state: s(x) | u_m for
// x in [z_m, z_{m+1}]; used by the approximate filter marginal likelihood.
struct ForwardConditional {
  MatrixXd A;  // d x d
  MatrixXd Q;  // d x d
};
ForwardConditional forward_conditional(const MarkovChain& chain, int m,
                                       double x);

// Half-open assignment z_m <= x < z_{m+1}; x = z_M goes to the last
// segment. Inputs must be sorted and covered by the grid.
struct SegmentAssignment {
  std::vector<int> segment;          // per datum, 0-based segment index
  std::vector<int> count;            // per segment, data assigned (sums to N)
  std::vector<int> count_half_open;  // per segment, data with x < z_{m+1}
  std::vector<int> left_count;       // per datum, strictly-left data in its segment
  std::vector<bool> right_edge;      // per datum, x exactly at z_{m+1}
};
SegmentAssignment assign_segments(const VectorXd& x_sorted,
                                  const InducingGrid& grid);

}  // namespace sitegp
