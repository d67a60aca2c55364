// Observation models. Each variant supplies exact log-density, conditional
// moments with Jacobian (for the linearisation updates), variational
// expectations with derivatives (for CVI), and the powered log-partition
// with derivatives (for PEP), closed-form where available and Gauss-Hermite
// cubature otherwise.
#pragma once

#include <string>

#include "sitegp/cubature.hpp"

namespace sitegp {

struct Likelihood {
  enum class Kind { Gaussian, BernoulliLogit, PoissonLog, HeteroscedasticGaussian };

  Kind kind = Kind::Gaussian;
  double noise_variance = 1.0;  // Gaussian
  double bin_width = 1.0;       // PoissonLog intensity scale

  static Likelihood gaussian(double noise_variance);
  static Likelihood bernoulli_logit();
  static Likelihood poisson_log(double bin_width = 1.0);
  static Likelihood heteroscedastic_gaussian();

  int latent_dim() const {
    return kind == Kind::HeteroscedasticGaussian ? 2 : 1;
  }
  std::string name() const;
  // Throws LikelihoodDomainError when y is invalid for the variant.
  void check_observation(double y) const;
};

double log_density(const Likelihood& lik, double y, const VectorXd& f);

struct ConditionalMoments {
  VectorXd mean;      // E[y | f]
  MatrixXd cov;       // Cov[y | f]
  MatrixXd dmean_df;  // Jacobian of E[y | f], (obs-dim x latent-dim)
};
ConditionalMoments conditional_moments(const Likelihood& lik,
                                       const VectorXd& f);

struct VariationalExpectation {
  double value = 0.0;
  VectorXd dmean;      // d/dmu
  MatrixXd dcov;       // d/dSigma (symmetric convention)
};
VariationalExpectation variational_expectation(const Likelihood& lik, double y,
                                               const VectorXd& mean,
                                               const MatrixXd& cov,
                                               const CubatureRule& rule);

struct LogPartition {
  double value = 0.0;  // log E_cav[p^alpha(y | f)]
  VectorXd dmean;      // d logZ / d mu_cav
  MatrixXd d2mean;     // d^2 logZ / d mu_cav^2
};
LogPartition log_partition(const Likelihood& lik, double y,
                           const VectorXd& mean_cav, const MatrixXd& cov_cav,
                           double alpha, const CubatureRule& rule);

// Mean and variance of y under a Gaussian belief q(f); used for RMSE-style
// metrics and plot output.
VectorXd predictive_mean(const Likelihood& lik, const VectorXd& mean,
                         const MatrixXd& cov, const CubatureRule& rule);

// Default rule matched to the likelihood's latent dimension.
CubatureRule default_rule(const Likelihood& lik, int order = 20);

}  // namespace sitegp
