#include "sitegp/likelihoods.hpp"

#include <cmath>

namespace sitegp {

namespace {

double log1pexp(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return log1pexp(x); }

// log p and its first/second derivatives in f, evaluated pointwise for the
// cubature paths.
struct PointDerivs {
  double logp;
  VectorXd grad;
  MatrixXd hess;
};

PointDerivs point_derivs(const Likelihood& lik, double y, const VectorXd& f) {
  PointDerivs out;
  switch (lik.kind) {
    case Likelihood::Kind::BernoulliLogit: {
      const double s = sigmoid(f(0));
      out.logp = y * f(0) - log1pexp(f(0));
      out.grad = VectorXd::Constant(1, y - s);
      out.hess = MatrixXd::Constant(1, 1, -s * (1.0 - s));
      return out;
    }
    case Likelihood::Kind::HeteroscedasticGaussian: {
      const double phi = softplus(f(1));
      const double dphi = sigmoid(f(1));
      const double d2phi = dphi * (1.0 - dphi);
      const double r = y - f(0);
      const double phi2 = phi * phi;
      out.logp = -0.5 * std::log(2.0 * M_PI) - std::log(phi) -
                 0.5 * r * r / phi2;
      out.grad.resize(2);
      out.grad(0) = r / phi2;
      out.grad(1) = -dphi / phi + r * r * dphi / (phi2 * phi);
      out.hess.resize(2, 2);
      out.hess(0, 0) = -1.0 / phi2;
      out.hess(0, 1) = -2.0 * r * dphi / (phi2 * phi);
      out.hess(1, 0) = out.hess(0, 1);
      out.hess(1, 1) = -d2phi / phi + (dphi * dphi) / phi2 +
                       r * r * (d2phi * phi - 3.0 * dphi * dphi) /
                           (phi2 * phi2);
      return out;
    }
    default:
      break;
  }
  throw ContractError("point_derivs called for a closed-form likelihood");
}

}  // namespace

Likelihood Likelihood::gaussian(double noise_variance) {
  if (!(noise_variance > 0.0)) {
    throw ParameterError("Gaussian noise variance must be positive");
  }
  Likelihood l;
  l.kind = Kind::Gaussian;
  l.noise_variance = noise_variance;
  return l;
}

Likelihood Likelihood::bernoulli_logit() {
  Likelihood l;
  l.kind = Kind::BernoulliLogit;
  return l;
}

Likelihood Likelihood::poisson_log(double bin_width) {
  if (!(bin_width > 0.0)) throw ParameterError("bin width must be positive");
  Likelihood l;
  l.kind = Kind::PoissonLog;
  l.bin_width = bin_width;
  return l;
}

Likelihood Likelihood::heteroscedastic_gaussian() {
  Likelihood l;
  l.kind = Kind::HeteroscedasticGaussian;
  return l;
}

std::string Likelihood::name() const {
  switch (kind) {
    case Kind::Gaussian: return "gaussian";
    case Kind::BernoulliLogit: return "bernoulli";
    case Kind::PoissonLog: return "poisson";
    case Kind::HeteroscedasticGaussian: return "heteroscedastic";
  }
  return "?";
}

void Likelihood::check_observation(double y) const {
  if (!std::isfinite(y)) throw LikelihoodDomainError("non-finite observation");
  switch (kind) {
    case Kind::BernoulliLogit:
      if (y != 0.0 && y != 1.0) {
        throw LikelihoodDomainError("Bernoulli observation must be 0 or 1, got " +
                                    std::to_string(y));
      }
      return;
    case Kind::PoissonLog:
      if (y < 0.0 || y != std::floor(y)) {
        throw LikelihoodDomainError(
            "Poisson observation must be a non-negative integer, got " +
            std::to_string(y));
      }
      return;
    default:
      return;
  }
}

double log_density(const Likelihood& lik, double y, const VectorXd& f) {
  if (!f.allFinite()) throw LikelihoodDomainError("non-finite latent value");
  lik.check_observation(y);
  switch (lik.kind) {
    case Likelihood::Kind::Gaussian: {
      const double r = y - f(0);
      return -0.5 * std::log(2.0 * M_PI * lik.noise_variance) -
             0.5 * r * r / lik.noise_variance;
    }
    case Likelihood::Kind::BernoulliLogit:
      return y * f(0) - log1pexp(f(0));
    case Likelihood::Kind::PoissonLog: {
      const double log_rate = f(0) + std::log(lik.bin_width);
      return y * log_rate - std::exp(log_rate) - std::lgamma(y + 1.0);
    }
    case Likelihood::Kind::HeteroscedasticGaussian: {
      const double phi = softplus(f(1));
      const double r = y - f(0);
      return -0.5 * std::log(2.0 * M_PI) - std::log(phi) -
             0.5 * r * r / (phi * phi);
    }
  }
  throw ContractError("unknown likelihood kind");
}

ConditionalMoments conditional_moments(const Likelihood& lik,
                                       const VectorXd& f) {
  if (!f.allFinite()) throw LikelihoodDomainError("non-finite latent value");
  ConditionalMoments out;
  switch (lik.kind) {
    case Likelihood::Kind::Gaussian:
      out.mean = f.head(1);
      out.cov = MatrixXd::Constant(1, 1, lik.noise_variance);
      out.dmean_df = MatrixXd::Identity(1, 1);
      return out;
    case Likelihood::Kind::BernoulliLogit: {
      const double s = sigmoid(f(0));
      out.mean = VectorXd::Constant(1, s);
      out.cov = MatrixXd::Constant(1, 1, s * (1.0 - s));
      out.dmean_df = MatrixXd::Constant(1, 1, s * (1.0 - s));
      return out;
    }
    case Likelihood::Kind::PoissonLog: {
      const double rate = lik.bin_width * std::exp(f(0));
      out.mean = VectorXd::Constant(1, rate);
      out.cov = MatrixXd::Constant(1, 1, rate);
      out.dmean_df = MatrixXd::Constant(1, 1, rate);
      return out;
    }
    case Likelihood::Kind::HeteroscedasticGaussian: {
      const double phi = softplus(f(1));
      out.mean = f.head(1);
      out.cov = MatrixXd::Constant(1, 1, phi * phi);
      out.dmean_df = MatrixXd::Zero(1, 2);
      out.dmean_df(0, 0) = 1.0;
      return out;
    }
  }
  throw ContractError("unknown likelihood kind");
}

VariationalExpectation variational_expectation(const Likelihood& lik, double y,
                                               const VectorXd& mean,
                                               const MatrixXd& cov,
                                               const CubatureRule& rule) {
  lik.check_observation(y);
  VariationalExpectation out;
  switch (lik.kind) {
    case Likelihood::Kind::Gaussian: {
      const double s2 = lik.noise_variance;
      const double r = y - mean(0);
      out.value = -0.5 * std::log(2.0 * M_PI * s2) -
                  0.5 * (r * r + cov(0, 0)) / s2;
      out.dmean = VectorXd::Constant(1, r / s2);
      out.dcov = MatrixXd::Constant(1, 1, -0.5 / s2);
      return out;
    }
    case Likelihood::Kind::PoissonLog: {
      // Closed form through the log-normal mean of the rate.
      const double ex = lik.bin_width * std::exp(mean(0) + 0.5 * cov(0, 0));
      out.value = y * (mean(0) + std::log(lik.bin_width)) - ex -
                  std::lgamma(y + 1.0);
      out.dmean = VectorXd::Constant(1, y - ex);
      out.dcov = MatrixXd::Constant(1, 1, -0.5 * ex);
      return out;
    }
    default:
      break;
  }
  const int dim = lik.latent_dim();
  if (rule.dim != dim) throw ParameterError("cubature rule dimension mismatch");
  MatrixXd nodes = shifted_nodes(rule, mean, cov);
  out.value = 0.0;
  out.dmean = VectorXd::Zero(dim);
  out.dcov = MatrixXd::Zero(dim, dim);
  for (int i = 0; i < rule.count(); ++i) {
    PointDerivs pd = point_derivs(lik, y, nodes.col(i));
    const double w = rule.weights(i);
    out.value += w * pd.logp;
    out.dmean += w * pd.grad;
    out.dcov += (0.5 * w) * pd.hess;
  }
  out.dcov = symmetrize(out.dcov);
  return out;
}

LogPartition log_partition(const Likelihood& lik, double y,
                           const VectorXd& mean_cav, const MatrixXd& cov_cav,
                           double alpha, const CubatureRule& rule) {
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw ParameterError("alpha must be in (0, 1]");
  }
  lik.check_observation(y);
  LogPartition out;
  if (lik.kind == Likelihood::Kind::Gaussian) {
    const double s2 = lik.noise_variance;
    const double s2a = s2 / alpha;
    const double v = cov_cav(0, 0) + s2a;
    const double r = y - mean_cav(0);
    out.value = -0.5 * alpha * std::log(2.0 * M_PI * s2) +
                0.5 * std::log(2.0 * M_PI * s2a) +
                (-0.5 * std::log(2.0 * M_PI * v) - 0.5 * r * r / v);
    out.dmean = VectorXd::Constant(1, r / v);
    out.d2mean = MatrixXd::Constant(1, 1, -1.0 / v);
    return out;
  }
  const int dim = lik.latent_dim();
  if (rule.dim != dim) throw ParameterError("cubature rule dimension mismatch");
  MatrixXd nodes = shifted_nodes(rule, mean_cav, cov_cav);
  // Tilted zeroth/first/second moments in one pass, log-sum-exp stabilized.
  VectorXd logw(rule.count());
  for (int i = 0; i < rule.count(); ++i) {
    logw(i) = std::log(rule.weights(i)) +
              alpha * log_density(lik, y, nodes.col(i));
  }
  const double lmax = logw.maxCoeff();
  VectorXd p = (logw.array() - lmax).exp();
  const double total = p.sum();
  out.value = lmax + std::log(total);
  p /= total;
  VectorXd mt = VectorXd::Zero(dim);
  for (int i = 0; i < rule.count(); ++i) mt += p(i) * nodes.col(i);
  MatrixXd st = MatrixXd::Zero(dim, dim);
  for (int i = 0; i < rule.count(); ++i) {
    VectorXd r = nodes.col(i) - mt;
    st += p(i) * (r * r.transpose());
  }
  auto llt = cholesky_jittered(cov_cav, "cavity covariance");
  MatrixXd prec = llt.solve(MatrixXd::Identity(dim, dim));
  out.dmean = prec * (mt - mean_cav);
  out.d2mean = symmetrize(prec * (st - cov_cav) * prec);
  return out;
}

VectorXd predictive_mean(const Likelihood& lik, const VectorXd& mean,
                         const MatrixXd& cov, const CubatureRule& rule) {
  switch (lik.kind) {
    case Likelihood::Kind::Gaussian:
      return mean.head(1);
    case Likelihood::Kind::PoissonLog:
      return VectorXd::Constant(
          1, lik.bin_width * std::exp(mean(0) + 0.5 * cov(0, 0)));
    case Likelihood::Kind::HeteroscedasticGaussian:
      return mean.head(1);
    case Likelihood::Kind::BernoulliLogit: {
      MatrixXd nodes = shifted_nodes(rule, mean, cov);
      double s = 0.0;
      for (int i = 0; i < rule.count(); ++i) {
        s += rule.weights(i) * sigmoid(nodes(0, i));
      }
      return VectorXd::Constant(1, s);
    }
  }
  throw ContractError("unknown likelihood kind");
}

CubatureRule default_rule(const Likelihood& lik, int order) {
  return cubature_rule(lik.latent_dim(), order);
}

}  // namespace sitegp
