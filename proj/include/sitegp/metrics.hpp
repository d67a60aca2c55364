// Predictive metrics over a test set.
#pragma once

#include <map>

#include "sitegp/likelihoods.hpp"
#include "sitegp/sites.hpp"

namespace sitegp {

struct Metrics {
  double nlpd = 0.0;   // per-point negative log predictive density
  double rmse = 0.0;
  double error_rate = 0.0;  // Bernoulli only; 0 otherwise
  std::map<std::string, double> as_map() const;
};

// predictions[i] is the posterior marginal q(f) at test point i; NLPD uses
// the likelihood's alpha = 1 log-partition under it.
Metrics evaluate(const std::vector<PredictedMarginal>& predictions,
                 const VectorXd& y_test, const Likelihood& lik,
                 const CubatureRule& rule);

}  // namespace sitegp
