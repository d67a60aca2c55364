#include "sitegp/metrics.hpp"

#include <cmath>

namespace sitegp {

std::map<std::string, double> Metrics::as_map() const {
  return {{"nlpd", nlpd}, {"rmse", rmse}, {"error_rate", error_rate}};
}

Metrics evaluate(const std::vector<PredictedMarginal>& predictions,
                 const VectorXd& y_test, const Likelihood& lik,
                 const CubatureRule& rule) {
  if (static_cast<int>(predictions.size()) != y_test.size()) {
    throw ParameterError("predictions and targets must align");
  }
  const int n = y_test.size();
  if (n == 0) throw ParameterError("empty test set");
  Metrics m;
  double se = 0.0;
  int misclassified = 0;
  for (int i = 0; i < n; ++i) {
    const auto& q = predictions[i];
    m.nlpd -= log_partition(lik, y_test(i), q.mean, q.cov, 1.0, rule).value;
    VectorXd ymean = predictive_mean(lik, q.mean, q.cov, rule);
    const double r = y_test(i) - ymean(0);
    se += r * r;
    if (lik.kind == Likelihood::Kind::BernoulliLogit) {
      const double label = ymean(0) > 0.5 ? 1.0 : 0.0;
      if (label != y_test(i)) ++misclassified;
    }
  }
  m.nlpd /= n;
  m.rmse = std::sqrt(se / n);
  if (lik.kind == Likelihood::Kind::BernoulliLogit) {
    m.error_rate = static_cast<double>(misclassified) / n;
  }
  return m;
}

}  // namespace sitegp
