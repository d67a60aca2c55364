// Brute-force reference computations the fast paths are checked against.
// Everything here goes through dense linear algebra on stacked states and
// never touches the filtering/smoothing code.
#pragma once

#include <vector>

#include "sitegp/dataset.hpp"
#include "sitegp/sites.hpp"

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using sitegp::KernelSpec;
using sitegp::LtiSde;
using sitegp::TiedSite;

// Stationary prior covariance over states stacked at sorted inputs:
// Cov(s(z_i), s(z_j)) = P0 expm(F (z_j - z_i))' for z_j >= z_i.
inline MatrixXd dense_state_prior(const LtiSde& sde, const VectorXd& z) {
  const int m = static_cast<int>(z.size());
  const int d = sde.d;
  MatrixXd k(m * d, m * d);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      MatrixXd block;
      if (z(j) >= z(i)) {
        block = sde.P0 * sitegp::expm(sde.F * (z(j) - z(i))).transpose();
      } else {
        block = sitegp::expm(sde.F * (z(i) - z(j))) * sde.P0;
      }
      k.block(i * d, j * d, d, d) = block;
    }
  }
  return k;
}

struct DensePosterior {
  VectorXd mean;    // stacked M d
  MatrixXd cov;
  double log_norm;  // log integral of prior times sites
};

// Add pair-site natural parameters into the stacked prior and renormalize.
inline DensePosterior dense_chain_posterior(const LtiSde& sde,
                                            const VectorXd& z,
                                            const std::vector<TiedSite>& sites) {
  const int m = static_cast<int>(z.size());
  const int d = sde.d;
  MatrixXd k = dense_state_prior(sde, z);
  MatrixXd jp = k.ldlt().solve(MatrixXd::Identity(m * d, m * d));
  MatrixXd j = 0.5 * (jp + jp.transpose());
  VectorXd h = VectorXd::Zero(m * d);
  double logz = 0.0;
  for (int s = 0; s < m - 1; ++s) {
    j.block(s * d, s * d, 2 * d, 2 * d) += sites[s].lam2;
    h.segment(s * d, 2 * d) += sites[s].lam1;
    logz += sites[s].logz;
  }
  DensePosterior out;
  Eigen::LDLT<MatrixXd> ldlt(j);
  out.cov = ldlt.solve(MatrixXd::Identity(m * d, m * d));
  out.mean = ldlt.solve(h);
  const double logdet_j = ldlt.vectorD().array().log().sum();
  Eigen::LDLT<MatrixXd> kldlt(k);
  const double logdet_k = kldlt.vectorD().array().log().sum();
  // log int p(u) prod t = logz + 1/2 h'mu - 1/2 (logdet J + logdet K).
  out.log_norm = logz + 0.5 * h.dot(out.mean) - 0.5 * (logdet_j + logdet_k);
  return out;
}

// Gram matrix of a single-output kernel at inputs x.
inline MatrixXd kernel_gram(const KernelSpec& spec, const VectorXd& a,
                            const VectorXd& b) {
  MatrixXd k(a.size(), b.size());
  for (int i = 0; i < a.size(); ++i) {
    for (int j = 0; j < b.size(); ++j) {
      k(i, j) = kernel_eval(spec, a(i) - b(j));
    }
  }
  return k;
}

struct DenseGp {
  double lml = 0.0;
  VectorXd post_mean;  // at the training inputs
  VectorXd post_var;
};

// Exact GP regression with iid Gaussian noise.
inline DenseGp dense_gp_regression(const KernelSpec& spec, const VectorXd& x,
                                   const VectorXd& y, double noise_var) {
  const int n = static_cast<int>(x.size());
  MatrixXd kxx = kernel_gram(spec, x, x);
  MatrixXd c = kxx + noise_var * MatrixXd::Identity(n, n);
  Eigen::LLT<MatrixXd> llt(c);
  VectorXd alpha = llt.solve(y);
  DenseGp out;
  out.lml = -0.5 * y.dot(alpha) -
            MatrixXd(llt.matrixL()).diagonal().array().log().sum() -
            0.5 * n * std::log(2.0 * M_PI);
  out.post_mean = kxx * alpha;
  MatrixXd v = llt.solve(kxx);
  out.post_var = (kxx - kxx * v).diagonal();
  return out;
}

// Exact Gaussian-likelihood site for a set of data in one segment, from the
// per-datum projections W (true conjugate factors, constants included).
inline TiedSite exact_gaussian_site(const std::vector<MatrixXd>& w,
                                    const std::vector<double>& y,
                                    double noise_var, int pair_dim) {
  TiedSite s = TiedSite::zero(pair_dim);
  for (std::size_t i = 0; i < w.size(); ++i) {
    s.lam2 += w[i].transpose() * w[i] / noise_var;
    s.lam1 += w[i].transpose() * VectorXd::Constant(1, y[i] / noise_var);
    s.logz += -0.5 * y[i] * y[i] / noise_var -
              0.5 * std::log(2.0 * M_PI * noise_var);
  }
  return s;
}

// Central finite difference of a scalar function.
template <typename F>
double fd_central(F f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline std::vector<TiedSite> random_psd_sites(int count, int pair_dim,
                                              sitegp::Rng& rng,
                                              double scale = 0.6) {
  std::vector<TiedSite> sites;
  for (int s = 0; s < count; ++s) {
    MatrixXd b(pair_dim, pair_dim);
    for (int i = 0; i < pair_dim; ++i) {
      for (int j = 0; j < pair_dim; ++j) b(i, j) = scale * rng.normal();
    }
    TiedSite site;
    site.lam2 = b * b.transpose();
    site.lam1 = VectorXd(pair_dim);
    for (int i = 0; i < pair_dim; ++i) site.lam1(i) = rng.normal();
    site.logz = 0.1 * rng.normal();
    sites.push_back(std::move(site));
  }
  return sites;
}

}  // namespace oracle
