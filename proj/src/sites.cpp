#include "sitegp/sites.hpp"

#include <cmath>

namespace sitegp {

TiedSite site_from_natural_fraction(const TiedSite& site, double k) {
  if (!(k > 0.0) || k > 1.0) {
    throw ParameterError("site fraction must be in (0, 1]");
  }
  TiedSite out;
  out.lam1 = k * site.lam1;
  out.lam2 = k * site.lam2;
  out.logz = k * site.logz;
  return out;
}

std::size_t site_storage_scalars(const std::vector<TiedSite>& sites) {
  std::size_t n = 0;
  for (const auto& s : sites) {
    n += static_cast<std::size_t>(s.lam1.size());
    n += static_cast<std::size_t>(s.lam2.size());
    n += 1;  // logz
  }
  return n;
}

namespace {

// Prior-joint of (u_m, u_{m+1}) given the filtered marginal at u_m.
void pair_prior(const MarkovChain& chain, int m, const Gaussian& fm,
                VectorXd& mean, MatrixXd& cov) {
  const int d = chain.sde.d;
  const MatrixXd& a = chain.A[m];
  mean.resize(2 * d);
  mean.head(d) = fm.mean;
  mean.tail(d) = a * fm.mean;
  MatrixXd sa = fm.cov * a.transpose();
  cov.resize(2 * d, 2 * d);
  cov.topLeftCorner(d, d) = fm.cov;
  cov.topRightCorner(d, d) = sa;
  cov.bottomLeftCorner(d, d) = sa.transpose();
  cov.bottomRightCorner(d, d) = symmetrize(a * sa + chain.Q[m]);
}

}  // namespace

FilterResult filter(const MarkovChain& chain,
                    const std::vector<TiedSite>& sites) {
  const int m_total = chain.grid.size();
  const int d = chain.sde.d;
  if (static_cast<int>(sites.size()) != m_total - 1) {
    throw ParameterError("need M-1 sites, got " +
                         std::to_string(sites.size()));
  }
  FilterResult out;
  out.marginal.reserve(m_total);
  out.pair.reserve(m_total - 1);
  out.step_log_norm.reserve(m_total - 1);
  out.marginal.push_back({VectorXd::Zero(d), chain.sde.P0});

  for (int m = 0; m + 1 < m_total; ++m) {
    const Gaussian& fm = out.marginal.back();
    VectorXd jm;
    MatrixXd js;
    pair_prior(chain, m, fm, jm, js);
    const TiedSite& site = sites[m];
    Gaussian joint;
    double step = site.logz;
    if (site.is_zero()) {
      joint.mean = jm;
      joint.cov = js;
    } else {
      MatrixXd jprec;
      VectorXd jh;
      try {
        auto llt = cholesky_jittered(js, "filter pair covariance");
        jprec = llt.solve(MatrixXd::Identity(2 * d, 2 * d));
        jh = llt.solve(jm);
      } catch (const NotPositiveDefiniteError& e) {
        throw FilterDivergenceError(m + 1, e.what());
      }
      MatrixXd post_prec = symmetrize(jprec + site.lam2);
      VectorXd post_h = jh + site.lam1;
      try {
        joint = Gaussian::from_natural(post_h, post_prec,
                                       "filter posterior precision");
      } catch (const NotPositiveDefiniteError& e) {
        throw FilterDivergenceError(m + 1, e.what());
      }
      // log c_m = logz + 1/2 (h_new' mu_new - h_old' mu_old)
      //         + 1/2 (logdet S_new - logdet S_old)
      step += 0.5 * (post_h.dot(joint.mean) - jh.dot(jm));
      step += 0.5 * (logdet_spd(joint.cov) - logdet_spd(js));
    }
    out.step_log_norm.push_back(step);
    out.log_norm += step;
    out.pair.push_back(joint);
    out.marginal.push_back(
        {joint.mean.tail(d), symmetrize(joint.cov.bottomRightCorner(d, d))});
  }
  return out;
}

ChainPosterior smooth(const MarkovChain& chain,
                      const std::vector<TiedSite>& sites,
                      FilterResult filtered) {
  (void)sites;
  const int m_total = chain.grid.size();
  const int d = chain.sde.d;
  ChainPosterior out;
  out.log_norm = filtered.log_norm;
  out.marginal.resize(m_total);
  out.pair.resize(m_total - 1);
  // The last filtered marginal already conditions on every site.
  out.marginal[m_total - 1] = filtered.marginal[m_total - 1];
  for (int m = m_total - 2; m >= 0; --m) {
    const Gaussian& joint = filtered.pair[m];
    const Gaussian& next = out.marginal[m + 1];
    MatrixXd s11 = joint.cov.topLeftCorner(d, d);
    MatrixXd s12 = joint.cov.topRightCorner(d, d);
    MatrixXd s22 = joint.cov.bottomRightCorner(d, d);
    // Gain of u_m | u_{m+1} under the site-inclusive filtered joint.
    auto llt = cholesky_jittered(s22, "smoother conditioning block");
    MatrixXd gain = llt.solve(s12.transpose()).transpose();
    VectorXd m1 = joint.mean.head(d);
    VectorXd m2 = joint.mean.tail(d);
    Gaussian& sm = out.marginal[m];
    sm.mean = m1 + gain * (next.mean - m2);
    sm.cov = symmetrize(s11 + gain * (next.cov - s22) * gain.transpose());
    Gaussian& pw = out.pair[m];
    pw.mean.resize(2 * d);
    pw.mean.head(d) = sm.mean;
    pw.mean.tail(d) = next.mean;
    MatrixXd cross = gain * next.cov;
    pw.cov.resize(2 * d, 2 * d);
    pw.cov.topLeftCorner(d, d) = sm.cov;
    pw.cov.topRightCorner(d, d) = cross;
    pw.cov.bottomLeftCorner(d, d) = cross.transpose();
    pw.cov.bottomRightCorner(d, d) = next.cov;
  }
  out.filtered = std::move(filtered);
  return out;
}

ChainPosterior posterior_of(const MarkovChain& chain,
                            const std::vector<TiedSite>& sites) {
  return smooth(chain, sites, filter(chain, sites));
}

double backward_log_norm(const MarkovChain& chain,
                         const std::vector<TiedSite>& sites) {
  // Backward message beta_m(u_m) = int p(u_{m+1}|u_m) t_m(v) beta_{m+1} du_{m+1},
  // carried in bare natural form (g, a, B), beta_M = 1.
  const int m_total = chain.grid.size();
  const int d = chain.sde.d;
  double g = 0.0;
  VectorXd a = VectorXd::Zero(d);
  MatrixXd b = MatrixXd::Zero(d, d);
  const double p0n = chain.sde.P0.norm();
  for (int m = m_total - 2; m >= 0; --m) {
    const MatrixXd& am = chain.A[m];
    MatrixXd qm = floor_eigenvalues(chain.Q[m], 1e-12 * p0n);
    auto qllt = cholesky_jittered(qm, "backward segment noise");
    MatrixXd qi = qllt.solve(MatrixXd::Identity(d, d));
    const double qld = 2.0 * MatrixXd(qllt.matrixL())
                                 .diagonal()
                                 .array()
                                 .log()
                                 .sum();
    // Integrand over u2: exp(-1/2 u2'(Qi + B + l2_22) u2 + u2'(Qi A u1 + a + l1_2 - l2_21 u1) ...)
    const TiedSite& s = sites[m];
    MatrixXd l11 = s.lam2.topLeftCorner(d, d);
    MatrixXd l12 = s.lam2.topRightCorner(d, d);
    MatrixXd l22 = s.lam2.bottomRightCorner(d, d);
    VectorXd l1a = s.lam1.head(d);
    VectorXd l1b = s.lam1.tail(d);
    MatrixXd j2 = symmetrize(qi + b + l22);
    auto j2llt = cholesky_jittered(j2, "backward message precision");
    MatrixXd j2i = j2llt.solve(MatrixXd::Identity(d, d));
    const double j2ld = 2.0 * MatrixXd(j2llt.matrixL())
                                  .diagonal()
                                  .array()
                                  .log()
                                  .sum();
    MatrixXd qa = qi * am;
    VectorXd c0 = a + l1b;
    // u2 linear coefficient is w u1 + c0 with w = Qi A - l12'; integrating
    // u2 out leaves quadratic A'QiA + l11 - w'J2^{-1}w and linear
    // l1a + w'J2^{-1}c0 in u1.
    MatrixXd w = qa - l12.transpose();
    MatrixXd wt_j2i = w.transpose() * j2i;
    MatrixXd b_new = symmetrize(am.transpose() * qa + l11 - wt_j2i * w);
    VectorXd a_new = l1a + wt_j2i * c0;
    g += s.logz + 0.5 * c0.dot(j2i * c0) - 0.5 * (j2ld + qld);
    a = a_new;
    b = b_new;
  }
  // Close with the stationary prior at u_1.
  MatrixXd p0i = cholesky_jittered(chain.sde.P0, "prior covariance")
                     .solve(MatrixXd::Identity(d, d));
  MatrixXd jf = symmetrize(p0i + b);
  double lp = log_partition(a, jf);
  double lp0 = 0.5 * (d * std::log(2.0 * M_PI) + logdet_spd(chain.sde.P0));
  return g + lp - lp0;
}

namespace {

PredictedMarginal project_pair(const Gaussian& pair, const MatrixXd& w,
                               const MatrixXd& nu) {
  PredictedMarginal out;
  out.mean = w * pair.mean;
  out.cov = symmetrize(w * pair.cov * w.transpose() + nu);
  return out;
}

}  // namespace

PredictedMarginal predict_f(const ChainPosterior& posterior,
                            const MarkovChain& chain, double x_query) {
  const auto& z = chain.grid.z;
  const int m_total = chain.grid.size();
  const MatrixXd& h = chain.sde.H;
  if (x_query >= z(0) && x_query <= z(m_total - 1)) {
    int lo = 0, hi = m_total - 1;
    while (hi - lo > 1) {
      int mid = (lo + hi) / 2;
      if (x_query >= z(mid)) lo = mid; else hi = mid;
    }
    if (lo == m_total - 1) lo = m_total - 2;
    FunctionConditional fc = function_conditional(chain, lo, x_query);
    return project_pair(posterior.pair[lo], fc.W, fc.nu);
  }
  // Beyond the grid: pure prior transitions from the boundary state.
  PredictedMarginal out;
  if (x_query > z(m_total - 1)) {
    const Gaussian& last = posterior.marginal[m_total - 1];
    MatrixXd a = expm(chain.sde.F * (x_query - z(m_total - 1)));
    MatrixXd q = symmetrize(chain.sde.P0 - a * chain.sde.P0 * a.transpose());
    out.mean = h * (a * last.mean);
    out.cov = symmetrize(h * (a * last.cov * a.transpose() + q) * h.transpose());
    return out;
  }
  // Time-reversed stationary transition for x before the grid.
  const Gaussian& first = posterior.marginal[0];
  MatrixXd a = expm(chain.sde.F * (z(0) - x_query));
  const MatrixXd& p0 = chain.sde.P0;
  MatrixXd rev =
      (p0 * a.transpose()) *
      cholesky_jittered(p0, "prior covariance").solve(MatrixXd::Identity(
          chain.sde.d, chain.sde.d));
  MatrixXd q = symmetrize(p0 - rev * a * p0);
  out.mean = h * (rev * first.mean);
  out.cov = symmetrize(h * (rev * first.cov * rev.transpose() + q) * h.transpose());
  return out;
}

std::vector<PredictedMarginal> predict_f(const ChainPosterior& posterior,
                                         const MarkovChain& chain,
                                         const VectorXd& x_query) {
  std::vector<PredictedMarginal> out;
  out.reserve(x_query.size());
  for (int i = 0; i < x_query.size(); ++i) {
    out.push_back(predict_f(posterior, chain, x_query(i)));
  }
  return out;
}

}  // namespace sitegp
