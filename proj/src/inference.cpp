#include "sitegp/inference.hpp"

#include <cmath>

namespace sitegp {

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Cvi: return "cvi";
    case Algorithm::Pep: return "pep";
    case Algorithm::Pl: return "pl";
    case Algorithm::Eks: return "eks";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& s) {
  if (s == "cvi") return Algorithm::Cvi;
  if (s == "pep") return Algorithm::Pep;
  if (s == "pl") return Algorithm::Pl;
  if (s == "eks") return Algorithm::Eks;
  throw ConfigError("unknown algorithm '" + s + "'");
}

std::string objective_name(Objective o) {
  switch (o) {
    case Objective::Elbo: return "elbo";
    case Objective::PepEnergy: return "pep_energy";
    case Objective::FilterMarglik: return "filter_marglik";
  }
  return "?";
}

Objective parse_objective(const std::string& s) {
  if (s == "elbo") return Objective::Elbo;
  if (s == "pep_energy") return Objective::PepEnergy;
  if (s == "filter_marglik") return Objective::FilterMarglik;
  throw ConfigError("unknown objective '" + s + "'");
}

void InferenceParams::validate() const {
  if (!(rho > 0.0) || rho > 1.0) throw ParameterError("rho must be in (0, 1]");
  if (!(alpha > 0.0) || alpha > 1.0)
    throw ParameterError("alpha must be in (0, 1]");
  if (!(damping > 0.0) || damping > 1.0)
    throw ParameterError("damping must be in (0, 1]");
}

ObservationModel observation_model(const MarkovChain& chain,
                                   const VectorXd& x_sorted) {
  ObservationModel om;
  om.seg = assign_segments(x_sorted, chain.grid);
  const int n = static_cast<int>(x_sorted.size());
  om.latent_dim = chain.sde.o;
  om.W.reserve(n);
  om.nu.reserve(n);
  om.Hfwd.reserve(n);
  om.Qfwd.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int m = om.seg.segment[i];
    FunctionConditional fc = function_conditional(chain, m, x_sorted(i));
    om.W.push_back(std::move(fc.W));
    om.nu.push_back(std::move(fc.nu));
    ForwardConditional fwd = forward_conditional(chain, m, x_sorted(i));
    om.Hfwd.push_back(chain.sde.H * fwd.A);
    om.Qfwd.push_back(
        symmetrize(chain.sde.H * fwd.Q * chain.sde.H.transpose()));
  }
  return om;
}

InferenceState init_state(const Problem& p) {
  InferenceState st;
  const int pair_dim = 2 * p.chain.sde.d;
  st.sites.assign(p.chain.segments(), TiedSite::zero(pair_dim));
  refresh_posterior(st, p);
  return st;
}

void refresh_posterior(InferenceState& state, const Problem& p) {
  state.posterior = posterior_of(p.chain, state.sites);
  state.posterior_current = true;
}

namespace {

void require_current(const InferenceState& state, const char* op) {
  if (!state.posterior_current) {
    throw ContractError(std::string(op) + " called with a stale posterior");
  }
}

struct PairNatural {
  VectorXd h;
  MatrixXd J;
  bool ok = false;
};

// Natural form of each smoothed pairwise marginal, computed once per sweep.
std::vector<PairNatural> pair_naturals(const ChainPosterior& post) {
  std::vector<PairNatural> out(post.pair.size());
  for (std::size_t m = 0; m < post.pair.size(); ++m) {
    try {
      auto llt = cholesky_jittered(post.pair[m].cov, "pair posterior");
      out[m].J = llt.solve(
          MatrixXd::Identity(post.pair[m].dim(), post.pair[m].dim()));
      out[m].h = llt.solve(post.pair[m].mean);
      out[m].ok = true;
    } catch (const NotPositiveDefiniteError&) {
      out[m].ok = false;
    }
  }
  return out;
}

struct MatchedSite {
  VectorXd dh;       // h* - h_cav
  MatrixXd dJ;       // J* - J_cav
  double dlogz = 0;  // logZ - Phi(q*) + Phi(q_cav)
  bool ok = false;
};

// One PEP moment-matching step for datum i given the pair natural form of
// its segment. Fraction k of the tied site is removed to build the cavity.
MatchedSite match_site(const Problem& p, const InferenceState& state, int i,
                       const PairNatural& pn, double k, double alpha) {
  MatchedSite out;
  const int m = p.obs.seg.segment[i];
  const TiedSite& site = state.sites[m];
  MatrixXd jc = symmetrize(pn.J - k * site.lam2);
  VectorXd hc = pn.h - k * site.lam1;
  Gaussian cav;
  try {
    cav = Gaussian::from_natural(hc, jc, "cavity precision");
  } catch (const NotPositiveDefiniteError&) {
    return out;
  }
  const MatrixXd& w = p.obs.W[i];
  VectorXd fmu = w * cav.mean;
  MatrixXd fcov = symmetrize(w * cav.cov * w.transpose() + p.obs.nu[i]);
  LogPartition lp;
  try {
    lp = log_partition(p.lik, p.y(i), fmu, fcov, alpha, p.rule);
  } catch (const NotPositiveDefiniteError&) {
    return out;
  }
  if (!std::isfinite(lp.value)) return out;
  MatrixXd cw = cav.cov * w.transpose();  // 2d x o
  VectorXd mu_star = cav.mean + cw * lp.dmean;
  MatrixXd cov_star = symmetrize(cav.cov + cw * lp.d2mean * cw.transpose());
  Gaussian star;
  MatrixXd js;
  VectorXd hs;
  try {
    auto llt = cholesky_jittered(cov_star, "matched posterior");
    js = llt.solve(MatrixXd::Identity(cov_star.rows(), cov_star.cols()));
    hs = llt.solve(mu_star);
  } catch (const NotPositiveDefiniteError&) {
    return out;
  }
  out.dh = hs - hc;
  out.dJ = symmetrize(js - jc);
  out.dlogz = lp.value - log_partition(hs, js) + log_partition(hc, jc);
  out.ok = true;
  return out;
}

}  // namespace

std::vector<TiedSite> cvi_update(const InferenceState& state, const Problem& p,
                                 double rho) {
  require_current(state, "cvi_update");
  if (!(rho > 0.0) || rho > 1.0) throw ParameterError("rho must be in (0, 1]");
  const int n = p.obs.size();
  const int pair_dim = 2 * p.chain.sde.d;
  std::vector<VectorXd> g1(state.sites.size(), VectorXd::Zero(pair_dim));
  std::vector<MatrixXd> g2(state.sites.size(),
                           MatrixXd::Zero(pair_dim, pair_dim));
  for (int i = 0; i < n; ++i) {
    const int m = p.obs.seg.segment[i];
    const Gaussian& pair = state.posterior.pair[m];
    const MatrixXd& w = p.obs.W[i];
    VectorXd fmu = w * pair.mean;
    MatrixXd fcov = symmetrize(w * pair.cov * w.transpose() + p.obs.nu[i]);
    VariationalExpectation ve =
        variational_expectation(p.lik, p.y(i), fmu, fcov, p.rule);
    // Precision-block convention: lam2 accumulates -2 W' dL/dSigma W.
    MatrixXd wt_dcov_w = w.transpose() * ve.dcov * w;
    g2[m] -= 2.0 * wt_dcov_w;
    g1[m] += w.transpose() * ve.dmean - 2.0 * (wt_dcov_w * pair.mean);
  }
  std::vector<TiedSite> out(state.sites.size());
  for (std::size_t m = 0; m < state.sites.size(); ++m) {
    out[m].lam1 = (1.0 - rho) * state.sites[m].lam1 + rho * g1[m];
    out[m].lam2 =
        symmetrize((1.0 - rho) * state.sites[m].lam2 + rho * g2[m]);
    out[m].logz = state.sites[m].logz;
  }
  return out;
}

std::vector<TiedSite> pep_update(const InferenceState& state, const Problem& p,
                                 double alpha, bool parallel, double damping,
                                 int* skips) {
  require_current(state, "pep_update");
  if (!(alpha > 0.0) || alpha > 1.0)
    throw ParameterError("alpha must be in (0, 1]");
  const int n = p.obs.size();
  int skipped = 0;

  if (parallel) {
    auto pn = pair_naturals(state.posterior);
    const int pair_dim = 2 * p.chain.sde.d;
    std::vector<VectorXd> dh(state.sites.size(), VectorXd::Zero(pair_dim));
    std::vector<MatrixXd> dj(state.sites.size(),
                             MatrixXd::Zero(pair_dim, pair_dim));
    std::vector<double> dz(state.sites.size(), 0.0);
    std::vector<int> ok_count(state.sites.size(), 0);
    for (int i = 0; i < n; ++i) {
      const int m = p.obs.seg.segment[i];
      if (!pn[m].ok) {
        ++skipped;
        continue;
      }
      const double k = alpha / p.obs.seg.count[m];
      MatchedSite ms = match_site(p, state, i, pn[m], k, alpha);
      if (!ms.ok) {
        ++skipped;
        continue;
      }
      dh[m] += ms.dh;
      dj[m] += ms.dJ;
      dz[m] += ms.dlogz;
      ok_count[m]++;
    }
    std::vector<TiedSite> out(state.sites.size());
    for (std::size_t m = 0; m < state.sites.size(); ++m) {
      const double keep =
          1.0 - alpha * (p.obs.seg.count[m] > 0
                             ? static_cast<double>(ok_count[m]) /
                                   p.obs.seg.count[m]
                             : 0.0);
      const TiedSite& old = state.sites[m];
      VectorXd l1 = keep * old.lam1 + dh[m];
      MatrixXd l2 = symmetrize(keep * old.lam2 + dj[m]);
      double lz = keep * old.logz + dz[m];
      out[m].lam1 = (1.0 - damping) * old.lam1 + damping * l1;
      out[m].lam2 = symmetrize((1.0 - damping) * old.lam2 + damping * l2);
      out[m].logz = (1.0 - damping) * old.logz + damping * lz;
    }
    if (skips) *skips += skipped;
    return out;
  }

  // Sequential: one datum at a time with a full posterior refresh between
  // updates. Kept for fixed-point tests; cost O(N M d^3) per pass.
  InferenceState work = state;
  for (int i = 0; i < n; ++i) {
    const int m = p.obs.seg.segment[i];
    const Gaussian& pair = work.posterior.pair[m];
    PairNatural pn;
    try {
      auto llt = cholesky_jittered(pair.cov, "pair posterior");
      pn.J = llt.solve(MatrixXd::Identity(pair.dim(), pair.dim()));
      pn.h = llt.solve(pair.mean);
      pn.ok = true;
    } catch (const NotPositiveDefiniteError&) {
      ++skipped;
      continue;
    }
    const double k = alpha / p.obs.seg.count[m];
    MatchedSite ms = match_site(p, work, i, pn, k, alpha);
    if (!ms.ok) {
      ++skipped;
      continue;
    }
    const TiedSite& old = work.sites[m];
    TiedSite updated;
    updated.lam1 = (1.0 - k) * old.lam1 + ms.dh;
    updated.lam2 = symmetrize((1.0 - k) * old.lam2 + ms.dJ);
    updated.logz = (1.0 - k) * old.logz + ms.dlogz;
    work.sites[m].lam1 =
        (1.0 - damping) * old.lam1 + damping * updated.lam1;
    work.sites[m].lam2 =
        symmetrize((1.0 - damping) * old.lam2 + damping * updated.lam2);
    work.sites[m].logz = (1.0 - damping) * old.logz + damping * updated.logz;
    refresh_posterior(work, p);
  }
  if (skips) *skips += skipped;
  return std::move(work.sites);
}

namespace {

// Shared PL/EKS site assembly from linearisation statistics.
void add_slr_site(const Problem& p, int i, const VectorXd& mu_v,
                  const Eigen::RowVectorXd& omega_row, double sigma_tilde,
                  double residual, std::vector<VectorXd>& l1,
                  std::vector<MatrixXd>& l2) {
  const int m = p.obs.seg.segment[i];
  const MatrixXd& w = p.obs.W[i];
  Eigen::RowVectorXd ow = omega_row * w;  // 1 x 2d
  MatrixXd site2 = (ow.transpose() * ow) / sigma_tilde;
  l2[m] += site2;
  l1[m] += site2 * mu_v + ow.transpose() * (residual / sigma_tilde);
}

std::vector<TiedSite> linearisation_update(const InferenceState& state,
                                           const Problem& p, double damping,
                                           int* skips, bool use_slr) {
  require_current(state, use_slr ? "pl_update" : "eks_update");
  const int n = p.obs.size();
  const int pair_dim = 2 * p.chain.sde.d;
  const int o = p.obs.latent_dim;
  std::vector<VectorXd> l1(state.sites.size(), VectorXd::Zero(pair_dim));
  std::vector<MatrixXd> l2(state.sites.size(),
                           MatrixXd::Zero(pair_dim, pair_dim));
  int skipped = 0;
  for (int i = 0; i < n; ++i) {
    const int m = p.obs.seg.segment[i];
    const Gaussian& pair = state.posterior.pair[m];
    const MatrixXd& w = p.obs.W[i];
    VectorXd fmu = w * pair.mean;
    MatrixXd fcov = symmetrize(w * pair.cov * w.transpose() + p.obs.nu[i]);
    Eigen::RowVectorXd omega_row(o);
    double sigma_tilde = 0.0;
    double resid = 0.0;
    const bool degenerate = fcov.diagonal().maxCoeff() < 1e-12;
    if (use_slr && !degenerate) {
      // Additive-noise SLR statistics over q(f_n) by cubature.
      MatrixXd nodes = shifted_nodes(p.rule, fmu, fcov);
      double omega = 0.0;
      for (int q = 0; q < p.rule.count(); ++q) {
        omega += p.rule.weights(q) *
                 conditional_moments(p.lik, nodes.col(q)).mean(0);
      }
      double b = 0.0;
      VectorXd c = VectorXd::Zero(o);
      for (int q = 0; q < p.rule.count(); ++q) {
        ConditionalMoments cm = conditional_moments(p.lik, nodes.col(q));
        const double e = cm.mean(0) - omega;
        b += p.rule.weights(q) * (e * e + cm.cov(0, 0));
        c += p.rule.weights(q) * (nodes.col(q) - fmu) * e;
      }
      auto llt = cholesky_jittered(fcov, "marginal covariance");
      VectorXd si_c = llt.solve(c);
      sigma_tilde = b - c.dot(si_c);
      omega_row = si_c.transpose();  // Omega = C' Sigma^{-1}
      resid = p.y(i) - omega;
    } else {
      // First-order expansion at the marginal mean.
      ConditionalMoments cm = conditional_moments(p.lik, fmu);
      omega_row = cm.dmean_df.row(0);
      sigma_tilde = cm.cov(0, 0);
      resid = p.y(i) - cm.mean(0);
    }
    if (!(sigma_tilde > 0.0) || !std::isfinite(sigma_tilde)) {
      ++skipped;
      continue;
    }
    add_slr_site(p, i, pair.mean, omega_row, sigma_tilde, resid, l1, l2);
  }
  std::vector<TiedSite> out(state.sites.size());
  for (std::size_t m = 0; m < state.sites.size(); ++m) {
    out[m].lam1 = (1.0 - damping) * state.sites[m].lam1 + damping * l1[m];
    out[m].lam2 =
        symmetrize((1.0 - damping) * state.sites[m].lam2 + damping * l2[m]);
    out[m].logz = state.sites[m].logz;
  }
  if (skips) *skips += skipped;
  return out;
}

}  // namespace

std::vector<TiedSite> pl_update(const InferenceState& state, const Problem& p,
                                double damping, int* skips) {
  return linearisation_update(state, p, damping, skips, /*use_slr=*/true);
}

std::vector<TiedSite> eks_update(const InferenceState& state, const Problem& p,
                                 double damping, int* skips) {
  return linearisation_update(state, p, damping, skips, /*use_slr=*/false);
}

void sweep(InferenceState& state, const Problem& p, Algorithm alg,
           const InferenceParams& params) {
  params.validate();
  switch (alg) {
    case Algorithm::Cvi:
      state.sites = cvi_update(state, p, params.rho);
      break;
    case Algorithm::Pep:
      state.sites = pep_update(state, p, params.alpha, params.parallel,
                               params.damping, &state.skip_count);
      break;
    case Algorithm::Pl:
      state.sites = pl_update(state, p, params.damping, &state.skip_count);
      break;
    case Algorithm::Eks:
      state.sites = eks_update(state, p, params.damping, &state.skip_count);
      break;
  }
  refresh_posterior(state, p);
  state.iteration++;
}

double elbo(const InferenceState& state, const Problem& p) {
  require_current(state, "elbo");
  double ve_sum = 0.0;
  for (int i = 0; i < p.obs.size(); ++i) {
    const int m = p.obs.seg.segment[i];
    const Gaussian& pair = state.posterior.pair[m];
    const MatrixXd& w = p.obs.W[i];
    VectorXd fmu = w * pair.mean;
    MatrixXd fcov = symmetrize(w * pair.cov * w.transpose() + p.obs.nu[i]);
    ve_sum += variational_expectation(p.lik, p.y(i), fmu, fcov, p.rule).value;
  }
  // E_q log t_m as a Gaussian expectation of the quadratic site exponent.
  double elogt = 0.0;
  for (std::size_t m = 0; m < state.sites.size(); ++m) {
    const TiedSite& s = state.sites[m];
    if (s.is_zero()) {
      elogt += s.logz;
      continue;
    }
    const Gaussian& pair = state.posterior.pair[m];
    elogt += s.logz + s.lam1.dot(pair.mean) -
             0.5 * (pair.mean.dot(s.lam2 * pair.mean) +
                    (s.lam2 * pair.cov).trace());
  }
  return ve_sum + state.posterior.log_norm - elogt;
}

double pep_energy(const InferenceState& state, const Problem& p,
                  double alpha) {
  require_current(state, "pep_energy");
  if (!(alpha > 0.0) || alpha > 1.0)
    throw ParameterError("alpha must be in (0, 1]");
  auto pn = pair_naturals(state.posterior);
  double site_terms = 0.0;
  for (int i = 0; i < p.obs.size(); ++i) {
    const int m = p.obs.seg.segment[i];
    if (!pn[m].ok) continue;
    const double k = alpha / p.obs.seg.count[m];
    MatchedSite ms = match_site(p, state, i, pn[m], k, alpha);
    if (!ms.ok) continue;  // mirrored with the update-time skip rule
    site_terms += ms.dlogz / alpha;
  }
  double logz_sum = 0.0;
  for (const auto& s : state.sites) logz_sum += s.logz;
  return site_terms + (state.posterior.log_norm - logz_sum);
}

double filter_marglik(const InferenceState& state, const Problem& p) {
  require_current(state, "filter_marglik");
  const int d = p.chain.sde.d;
  double total = 0.0;
  for (int i = 0; i < p.obs.size(); ++i) {
    const int m = p.obs.seg.segment[i];
    // Fraction of the tied site carrying the strictly-left data. Data at
    // the closed right edge take the full forward contribution; the site's
    // information about u_{m+1} is dropped by the left-marginalization.
    double k;
    if (p.obs.seg.right_edge[i]) {
      k = 1.0;
    } else if (p.obs.seg.count_half_open[m] > 0) {
      k = static_cast<double>(p.obs.seg.left_count[i]) /
          p.obs.seg.count_half_open[m];
    } else {
      k = 0.0;
    }
    const Gaussian& fm = state.posterior.filtered.marginal[m];
    Gaussian tilted = fm;
    const TiedSite& s = state.sites[m];
    if (k > 0.0 && !s.is_zero()) {
      auto llt = cholesky_jittered(fm.cov, "filter marginal");
      MatrixXd j = llt.solve(MatrixXd::Identity(d, d)) +
                   k * s.lam2.topLeftCorner(d, d);
      VectorXd h = llt.solve(fm.mean) + k * s.lam1.head(d);
      tilted = Gaussian::from_natural(h, symmetrize(j), "left site fraction");
    }
    const MatrixXd& hf = p.obs.Hfwd[i];
    VectorXd fmu = hf * tilted.mean;
    MatrixXd fcov =
        symmetrize(hf * tilted.cov * hf.transpose() + p.obs.Qfwd[i]);
    total += log_partition(p.lik, p.y(i), fmu, fcov, 1.0, p.rule).value;
  }
  return total;
}

double objective_value(const InferenceState& state, const Problem& p,
                       Objective obj, double alpha) {
  switch (obj) {
    case Objective::Elbo: return elbo(state, p);
    case Objective::PepEnergy: return pep_energy(state, p, alpha);
    case Objective::FilterMarglik: return filter_marglik(state, p);
  }
  throw ContractError("unknown objective");
}

FitResult fit(const ModelBuilder& builder, VectorXd log_hyper_init,
              const VectorXd& y, const Likelihood& lik,
              const TrainConfig& cfg) {
  if (cfg.iterations < 0) throw ParameterError("iterations must be >= 0");
  cfg.params.validate();
  CubatureRule rule = default_rule(lik, cfg.cubature_order);

  FitResult res;
  res.log_hyper = std::move(log_hyper_init);
  res.model = builder(res.log_hyper);
  {
    Problem p{res.model.chain, res.model.obs, lik, y, rule};
    res.state = init_state(p);
  }
  const int np = static_cast<int>(res.log_hyper.size());
  VectorXd adam_m = VectorXd::Zero(np);
  VectorXd adam_v = VectorXd::Zero(np);

  auto objective_at = [&](const VectorXd& params,
                          const std::vector<TiedSite>& sites) {
    BuiltModel model = builder(params);
    Problem p{model.chain, model.obs, lik, y, rule};
    InferenceState st;
    st.sites = sites;
    refresh_posterior(st, p);
    return objective_value(st, p, cfg.objective, cfg.params.alpha);
  };

  for (int it = 0; it < cfg.iterations; ++it) {
    Problem p{res.model.chain, res.model.obs, lik, y, rule};
    try {
      sweep(res.state, p, cfg.algorithm, cfg.params);
    } catch (const FilterDivergenceError& e) {
      throw FilterDivergenceError(
          e.step, "training aborted at iteration " + std::to_string(it) +
                      ": " + e.what());
    }
    double center = objective_value(res.state, p, cfg.objective,
                                    cfg.params.alpha);
    res.trace.push_back(
        {it, center, res.log_hyper, res.state.skip_count});

    if (np > 0) {
      VectorXd grad(np);
      for (int j = 0; j < np; ++j) {
        VectorXd up = res.log_hyper;
        VectorXd dn = res.log_hyper;
        up(j) += cfg.fd_epsilon;
        dn(j) -= cfg.fd_epsilon;
        const double fu = objective_at(up, res.state.sites);
        const double fd = objective_at(dn, res.state.sites);
        grad(j) = (fu - fd) / (2.0 * cfg.fd_epsilon);
      }
      // Adam ascent on the objective.
      for (int j = 0; j < np; ++j) {
        adam_m(j) = cfg.adam_beta1 * adam_m(j) + (1 - cfg.adam_beta1) * grad(j);
        adam_v(j) = cfg.adam_beta2 * adam_v(j) +
                    (1 - cfg.adam_beta2) * grad(j) * grad(j);
        const double mhat = adam_m(j) / (1 - std::pow(cfg.adam_beta1, it + 1));
        const double vhat = adam_v(j) / (1 - std::pow(cfg.adam_beta2, it + 1));
        res.log_hyper(j) +=
            cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_epsilon);
      }
      res.model = builder(res.log_hyper);
      Problem pnew{res.model.chain, res.model.obs, lik, y, rule};
      refresh_posterior(res.state, pnew);
    }
  }
  return res;
}

}  // namespace sitegp
