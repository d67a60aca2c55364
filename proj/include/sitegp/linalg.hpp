// Dense linear-algebra helpers shared across the library: fixed-order
// scaling-and-squaring matrix exponential, stationary Lyapunov solve,
// jitter-escalating Cholesky, and Gaussian moment/natural conversions.
#pragma once

#include <Eigen/Dense>

#include "sitegp/errors.hpp"

namespace sitegp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd symmetrize(const MatrixXd& a) {
  return 0.5 * (a + a.transpose());
}

// expm(A) by scaling-and-squaring with a fixed [13/13] Pade approximant.
MatrixXd expm(const MatrixXd& a);

// Solve F P + P F^T + S = 0 for the stationary covariance P (S symmetric
// PSD, F strictly stable). Result is symmetrized. Throws StabilityError if
// any eigenvalue of F has non-negative real part.
MatrixXd solve_lyapunov(const MatrixXd& f, const MatrixXd& s);

// Cholesky with escalating jitter: starts at 1e-10 * mean diagonal scale and
// multiplies by 10 up to 1e-6 * scale before giving up.
Eigen::LLT<MatrixXd> cholesky_jittered(const MatrixXd& a,
                                       const char* what = "matrix");

// log det of an SPD matrix via jittered Cholesky.
double logdet_spd(const MatrixXd& a);

// Clamp eigenvalues of a symmetric matrix from below.
MatrixXd floor_eigenvalues(const MatrixXd& a, double floor);

// Gaussian in moment form with cached conversions to natural form
// (h = S^{-1} m, J = S^{-1}).
struct Gaussian {
  VectorXd mean;
  MatrixXd cov;

  int dim() const { return static_cast<int>(mean.size()); }
  VectorXd h() const;
  MatrixXd precision() const;
  static Gaussian from_natural(const VectorXd& h, const MatrixXd& prec,
                               const char* what = "gaussian");
};

// Log-partition of the bare exponential form exp(h'v - 1/2 v'Jv):
// 1/2 h'J^{-1}h + 1/2 logdet(2 pi J^{-1}).
double log_partition(const VectorXd& h, const MatrixXd& prec);

// log N(x; mean, cov) for SPD cov.
double log_gaussian_density(const VectorXd& x, const VectorXd& mean,
                            const MatrixXd& cov);

}  // namespace sitegp
