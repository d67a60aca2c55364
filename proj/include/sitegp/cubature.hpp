// Gauss-Hermite cubature against standard-normal weight, with product grids
// for small latent dimensions.
#pragma once

#include <vector>

#include "sitegp/linalg.hpp"

namespace sitegp {

struct CubatureRule {
  // Product-grid nodes for dimension dim: each column of `nodes` is one
  // node (dim x n_nodes); weights sum to one.
  MatrixXd nodes;
  VectorXd weights;
  int order = 20;
  int dim = 1;

  int count() const { return static_cast<int>(weights.size()); }
};

// 1-D Gauss-Hermite rule normalized against N(0,1).
void gauss_hermite(int order, VectorXd& nodes, VectorXd& weights);

// Product rule; dim must be 1..3 (UnsupportedDimensionError otherwise).
CubatureRule cubature_rule(int dim, int order = 20);

// Nodes shifted and scaled for N(mean, cov): column i is mean + L nodes_i.
MatrixXd shifted_nodes(const CubatureRule& rule, const VectorXd& mean,
                       const MatrixXd& cov);

}  // namespace sitegp
