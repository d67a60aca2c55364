#include "sitegp/linalg.hpp"

#include <cmath>

namespace sitegp {

MatrixXd expm(const MatrixXd& a) {
  // Pade [13/13] with scaling chosen so the scaled 1-norm is below the
  // order-13 bound; the order itself is never adapted.
  static const double c[14] = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
      1187353796428800.0,  129060195264000.0,   10559470521600.0,
      670442572800.0,      33522128640.0,       1323241920.0,
      40840800.0,          960960.0,            16380.0,
      182.0,               1.0};
  const int n = static_cast<int>(a.rows());
  const double theta13 = 5.371920351148152;
  double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > theta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / theta13)));
  }
  MatrixXd as = a / std::pow(2.0, squarings);

  MatrixXd a2 = as * as;
  MatrixXd a4 = a2 * a2;
  MatrixXd a6 = a2 * a4;
  MatrixXd ident = MatrixXd::Identity(n, n);
  MatrixXd u =
      as * (a6 * (c[13] * a6 + c[11] * a4 + c[9] * a2) + c[7] * a6 +
            c[5] * a4 + c[3] * a2 + c[1] * ident);
  MatrixXd v = a6 * (c[12] * a6 + c[10] * a4 + c[8] * a2) + c[6] * a6 +
               c[4] * a4 + c[2] * a2 + c[0] * ident;
  MatrixXd r = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) r = r * r;
  return r;
}

MatrixXd solve_lyapunov(const MatrixXd& f, const MatrixXd& s) {
  const int d = static_cast<int>(f.rows());
  Eigen::EigenSolver<MatrixXd> es(f);
  for (int i = 0; i < d; ++i) {
    if (es.eigenvalues()(i).real() >= -1e-12) {
      throw StabilityError("feedback matrix is not strictly stable");
    }
  }
  // Vectorized solve: (I (x) F + F (x) I) vec(P) = -vec(S).
  MatrixXd k = MatrixXd::Zero(d * d, d * d);
  for (int i = 0; i < d; ++i) {
    k.block(i * d, i * d, d, d) += f;
    for (int j = 0; j < d; ++j) {
      for (int r = 0; r < d; ++r) k(i * d + r, j * d + r) += f(i, j);
    }
  }
  VectorXd rhs(d * d);
  for (int j = 0; j < d; ++j) rhs.segment(j * d, d) = -s.col(j);
  VectorXd p = k.partialPivLu().solve(rhs);
  MatrixXd out(d, d);
  for (int j = 0; j < d; ++j) out.col(j) = p.segment(j * d, d);
  return symmetrize(out);
}

Eigen::LLT<MatrixXd> cholesky_jittered(const MatrixXd& a, const char* what) {
  const int n = static_cast<int>(a.rows());
  MatrixXd sym = symmetrize(a);
  double scale = sym.diagonal().cwiseAbs().mean();
  if (scale <= 0.0 || !std::isfinite(scale)) scale = 1.0;
  Eigen::LLT<MatrixXd> llt(sym);
  if (llt.info() == Eigen::Success) return llt;
  for (double jitter = 1e-10 * scale; jitter <= 1e-6 * scale * 1.0000001;
       jitter *= 10.0) {
    llt.compute(sym + jitter * MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) return llt;
  }
  throw NotPositiveDefiniteError(std::string(what) +
                                 " not positive definite after jitter");
}

double logdet_spd(const MatrixXd& a) {
  auto llt = cholesky_jittered(a, "logdet argument");
  return 2.0 * MatrixXd(llt.matrixL()).diagonal().array().log().sum();
}

MatrixXd floor_eigenvalues(const MatrixXd& a, double floor) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(a));
  VectorXd ev = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

VectorXd Gaussian::h() const {
  auto llt = cholesky_jittered(cov, "gaussian covariance");
  return llt.solve(mean);
}

MatrixXd Gaussian::precision() const {
  auto llt = cholesky_jittered(cov, "gaussian covariance");
  return llt.solve(MatrixXd::Identity(dim(), dim()));
}

Gaussian Gaussian::from_natural(const VectorXd& h, const MatrixXd& prec,
                                const char* what) {
  auto llt = cholesky_jittered(prec, what);
  Gaussian g;
  g.cov = symmetrize(llt.solve(MatrixXd::Identity(h.size(), h.size())));
  g.mean = llt.solve(h);
  return g;
}

double log_partition(const VectorXd& h, const MatrixXd& prec) {
  auto llt = cholesky_jittered(prec, "log-partition precision");
  const double ld =
      2.0 * MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  const double n = static_cast<double>(h.size());
  return 0.5 * h.dot(llt.solve(h)) +
         0.5 * (n * std::log(2.0 * M_PI) - ld);
}

double log_gaussian_density(const VectorXd& x, const VectorXd& mean,
                            const MatrixXd& cov) {
  auto llt = cholesky_jittered(cov, "density covariance");
  VectorXd r = x - mean;
  const double ld =
      2.0 * MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  const double n = static_cast<double>(x.size());
  return -0.5 * r.dot(llt.solve(r)) - 0.5 * ld -
         0.5 * n * std::log(2.0 * M_PI);
}

}  // namespace sitegp
