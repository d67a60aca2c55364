// Tied Gaussian sites over consecutive inducing-state pairs and the chain
// posterior: forward filtering, backward smoothing, log-normalizer, and
// marginal prediction.
#pragma once

#include <vector>

#include "sitegp/chain.hpp"

namespace sitegp {

// Unnormalized Gaussian factor over v_m = [u_m; u_{m+1}]:
//   t(v) = exp(logz + lam1' v - 1/2 v' lam2 v)
// lam2 is kept symmetric; the zero site is the multiplicative identity.
struct TiedSite {
  VectorXd lam1;   // 2d
  MatrixXd lam2;   // 2d x 2d
  double logz = 0.0;

  static TiedSite zero(int pair_dim) {
    TiedSite s;
    s.lam1 = VectorXd::Zero(pair_dim);
    s.lam2 = MatrixXd::Zero(pair_dim, pair_dim);
    return s;
  }
  bool is_zero() const {
    return lam1.isZero(0.0) && lam2.isZero(0.0);
  }
};

// Scale natural parameters and logz by k in (0, 1].
TiedSite site_from_natural_fraction(const TiedSite& site, double k);

// Total scalars held by a site vector (the O(M d^2) storage claim).
std::size_t site_storage_scalars(const std::vector<TiedSite>& sites);

struct FilterResult {
  // q^f(u_m) arriving at each grid point: includes sites 1..m-1 only.
  std::vector<Gaussian> marginal;       // M entries
  // Site-inclusive filtered pair joints q^f(v_m), m = 1..M-1.
  std::vector<Gaussian> pair;           // M-1 entries
  std::vector<double> step_log_norm;    // per-step normalizers log c_m
  double log_norm = 0.0;                // sum, includes site logz terms
};

struct ChainPosterior {
  std::vector<Gaussian> marginal;       // smoothed q^s(u_m), M entries
  std::vector<Gaussian> pair;           // smoothed q^s(v_m), M-1 entries
  FilterResult filtered;                // retained for the filter objectives
  double log_norm = 0.0;
};

FilterResult filter(const MarkovChain& chain,
                    const std::vector<TiedSite>& sites);
ChainPosterior smooth(const MarkovChain& chain,
                      const std::vector<TiedSite>& sites,
                      FilterResult filtered);
// filter + smooth in one call.
ChainPosterior posterior_of(const MarkovChain& chain,
                            const std::vector<TiedSite>& sites);

// Log-normalizer computed by a backward message pass; independent check of
// FilterResult::log_norm.
double backward_log_norm(const MarkovChain& chain,
                         const std::vector<TiedSite>& sites);

// Marginal q(f(x)) at one query point. Inside the grid this reads the local
// pairwise marginal; outside, pure prior transitions extrapolate from the
// boundary state.
struct PredictedMarginal {
  VectorXd mean;  // o
  MatrixXd cov;   // o x o
};
PredictedMarginal predict_f(const ChainPosterior& posterior,
                            const MarkovChain& chain, double x_query);
std::vector<PredictedMarginal> predict_f(const ChainPosterior& posterior,
                                         const MarkovChain& chain,
                                         const VectorXd& x_query);

}  // namespace sitegp
