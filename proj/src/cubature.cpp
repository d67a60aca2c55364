#include "sitegp/cubature.hpp"

#include <cmath>

namespace sitegp {

void gauss_hermite(int order, VectorXd& nodes, VectorXd& weights) {
  if (order < 1) throw ParameterError("cubature order must be >= 1");
  // Golub-Welsch on the probabilists' Hermite recurrence: off-diagonal
  // sqrt(k), weights from squared first eigenvector components.
  MatrixXd j = MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    const double b = std::sqrt(static_cast<double>(k));
    j(k - 1, k) = b;
    j(k, k - 1) = b;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(j);
  nodes = es.eigenvalues();
  weights.resize(order);
  for (int i = 0; i < order; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    weights(i) = v0 * v0;
  }
  weights /= weights.sum();
}

CubatureRule cubature_rule(int dim, int order) {
  if (dim < 1 || dim > 3) {
    throw UnsupportedDimensionError("cubature supports latent dimension 1-3, got " +
                                    std::to_string(dim));
  }
  VectorXd n1, w1;
  gauss_hermite(order, n1, w1);
  CubatureRule rule;
  rule.order = order;
  rule.dim = dim;
  int total = 1;
  for (int i = 0; i < dim; ++i) total *= order;
  rule.nodes.resize(dim, total);
  rule.weights.resize(total);
  for (int i = 0; i < total; ++i) {
    int rem = i;
    double w = 1.0;
    for (int k = 0; k < dim; ++k) {
      const int idx = rem % order;
      rem /= order;
      rule.nodes(k, i) = n1(idx);
      w *= w1(idx);
    }
    rule.weights(i) = w;
  }
  return rule;
}

MatrixXd shifted_nodes(const CubatureRule& rule, const VectorXd& mean,
                       const MatrixXd& cov) {
  if (mean.size() != rule.dim) {
    throw ParameterError("cubature rule dimension mismatch");
  }
  MatrixXd l = MatrixXd(cholesky_jittered(cov, "cubature covariance").matrixL());
  return (l * rule.nodes).colwise() + mean;
}

}  // namespace sitegp
