#include "sitegp/spatiotemporal.hpp"

#include <cmath>

namespace sitegp {

namespace {

MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

// Temporal-chain pieces for an interior x; endpoints reduce to selectors.
struct TemporalConditional {
  MatrixXd R1, R2, T;
  bool left_endpoint = false, right_endpoint = false;
};

TemporalConditional temporal_conditional(const LtiSde& sde,
                                         const MarkovChain& tchain, int m,
                                         double x) {
  StateConditional sc = state_conditional(tchain, m, x);
  TemporalConditional out;
  const int d = sde.d;
  out.R1 = sc.R.leftCols(d);
  out.R2 = sc.R.rightCols(d);
  out.T = sc.T;
  out.left_endpoint = (x == tchain.grid.z(m));
  out.right_endpoint = (x == tchain.grid.z(m + 1));
  return out;
}

}  // namespace

MatrixXd spatial_gram(const KernelSpec& kernel, const MatrixXd& a,
                      const MatrixXd& b) {
  MatrixXd out(a.rows(), b.rows());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < b.rows(); ++j) {
      out(i, j) = kernel_eval(kernel, (a.row(i) - b.row(j)).norm());
    }
  }
  return out;
}

SpatioTemporalChain build_st_chain(const KernelSpec& temporal_kernel,
                                   const SpatialConfig& spatial,
                                   const InducingGrid& z_x) {
  SpatioTemporalChain st;
  st.temporal = to_state_space(temporal_kernel);
  if (st.temporal.o != 1) {
    throw ParameterError("spatio-temporal temporal kernel must be single-output");
  }
  st.spatial = spatial;
  st.mz = static_cast<int>(spatial.locations.rows());
  if (st.mz < 1) throw ParameterError("need at least one spatial location");
  for (int i = 0; i < st.mz; ++i) {
    for (int j = i + 1; j < st.mz; ++j) {
      if ((spatial.locations.row(i) - spatial.locations.row(j)).norm() == 0.0) {
        throw ParameterError("spatial inducing locations must be distinct");
      }
    }
  }
  MatrixXd kzz = spatial_gram(spatial.kernel, spatial.locations,
                              spatial.locations);
  const double scale = kzz.diagonal().mean();
  double jitter = spatial.jitter * scale;
  Eigen::LLT<MatrixXd> llt;
  for (int attempt = 0;; ++attempt) {
    st.kzz = kzz + jitter * MatrixXd::Identity(st.mz, st.mz);
    llt.compute(st.kzz);
    if (llt.info() == Eigen::Success) break;
    jitter *= 10.0;
    if (attempt >= 6) {
      throw NotPositiveDefiniteError(
          "spatial Gram not positive definite after jitter escalation");
    }
  }
  st.kzz_llt = llt;

  // Joint SDE: F = I (x) Fx, L = I (x) Lx, Qc = Kzz (x) Qcx, P0 = Kzz (x) P0x.
  const LtiSde& tx = st.temporal;
  LtiSde joint;
  joint.d = st.mz * tx.d;
  joint.e = st.mz * tx.e;
  joint.o = st.mz;
  MatrixXd eye = MatrixXd::Identity(st.mz, st.mz);
  joint.F = kron(eye, tx.F);
  joint.L = kron(eye, tx.L);
  joint.Qc = kron(st.kzz, tx.Qc);
  joint.H = kron(eye, tx.H);
  joint.P0 = kron(st.kzz, tx.P0);

  // Kronecker transitions via the temporal discretization; identical to
  // discretize() on the joint SDE but without large matrix exponentials.
  st.temporal_chain = discretize(tx, z_x);
  st.chain.sde = joint;
  st.chain.grid = z_x;
  st.chain.A.reserve(st.temporal_chain.segments());
  st.chain.Q.reserve(st.temporal_chain.segments());
  for (int m = 0; m < st.temporal_chain.segments(); ++m) {
    st.chain.A.push_back(kron(eye, st.temporal_chain.A[m]));
    st.chain.Q.push_back(kron(st.kzz, st.temporal_chain.Q[m]));
  }
  return st;
}

SpatialConditional spatial_conditional(const SpatioTemporalChain& st,
                                       const VectorXd& r_query) {
  MatrixXd krz = spatial_gram(st.spatial.kernel,
                              r_query.transpose(), st.spatial.locations);
  VectorXd w = st.kzz_llt.solve(krz.transpose());  // K_zz^{-1} K_{z,r}
  SpatialConditional out;
  const int d = st.temporal.d;
  out.b.resize(st.mz * d);
  for (int i = 0; i < st.mz; ++i) {
    out.b.segment(i * d, d) = w(i) * st.temporal.H.row(0);
  }
  const double krr = kernel_eval(st.spatial.kernel, 0.0);
  out.c = std::max(0.0, krr - krz.row(0).dot(w));
  return out;
}

FunctionConditional st_function_conditional(const SpatioTemporalChain& st,
                                            int m, double x,
                                            const VectorXd& r) {
  // Temporal (R, T) lift as I (x) R1, I (x) R2, Kzz (x) T; composing with
  // B(r) = w' (x) H collapses the Kronecker products to small temporal
  // matrices scaled by the spatial weights.
  MatrixXd krz = spatial_gram(st.spatial.kernel,
                              r.transpose(), st.spatial.locations);
  VectorXd w = st.kzz_llt.solve(krz.transpose());
  const double krr = kernel_eval(st.spatial.kernel, 0.0);
  const double c = std::max(0.0, krr - krz.row(0).dot(w));
  TemporalConditional tc =
      temporal_conditional(st.temporal, st.temporal_chain, m, x);
  const int d = st.temporal.d;
  Eigen::RowVectorXd hr1 = st.temporal.H * tc.R1;  // 1 x d
  Eigen::RowVectorXd hr2 = st.temporal.H * tc.R2;
  const double htht = (st.temporal.H * tc.T * st.temporal.H.transpose())(0, 0);
  // nu = (w' Kzz w) * H T H' + C(r).
  const double wkw = w.dot(st.kzz * w);

  FunctionConditional fc;
  fc.W = MatrixXd::Zero(1, 2 * st.mz * d);
  for (int i = 0; i < st.mz; ++i) {
    fc.W.block(0, i * d, 1, d) = w(i) * hr1;
    fc.W.block(0, st.mz * d + i * d, 1, d) = w(i) * hr2;
  }
  fc.nu = MatrixXd::Constant(1, 1, wkw * htht + c);
  return fc;
}

ObservationModel st_observation_model(const SpatioTemporalChain& st,
                                      const VectorXd& x_sorted,
                                      const MatrixXd& r_rows) {
  if (r_rows.rows() != x_sorted.size()) {
    throw ParameterError("spatial rows must match temporal inputs");
  }
  ObservationModel om;
  om.seg = assign_segments(x_sorted, st.chain.grid);
  om.latent_dim = 1;
  const int n = static_cast<int>(x_sorted.size());
  const int d = st.temporal.d;
  om.W.reserve(n);
  om.nu.reserve(n);
  om.Hfwd.reserve(n);
  om.Qfwd.reserve(n);
  // Temporal forward pieces cached per unique x would be possible; per-datum
  // d x d exponentials are already cheap compared to the joint filter.
  for (int i = 0; i < n; ++i) {
    const int m = om.seg.segment[i];
    FunctionConditional fc =
        st_function_conditional(st, m, x_sorted(i), r_rows.row(i).transpose());
    om.W.push_back(std::move(fc.W));
    om.nu.push_back(std::move(fc.nu));

    MatrixXd krz = spatial_gram(st.spatial.kernel, r_rows.row(i),
                                st.spatial.locations);
    VectorXd w = st.kzz_llt.solve(krz.transpose());
    const double krr = kernel_eval(st.spatial.kernel, 0.0);
    const double c = std::max(0.0, krr - krz.row(0).dot(w));
    MatrixXd a1 = expm(st.temporal.F * (x_sorted(i) - st.chain.grid.z(m)));
    MatrixXd q1 = symmetrize(st.temporal.P0 -
                             a1 * st.temporal.P0 * a1.transpose());
    Eigen::RowVectorXd ha = st.temporal.H * a1;
    MatrixXd hfwd = MatrixXd::Zero(1, st.mz * d);
    for (int k = 0; k < st.mz; ++k) hfwd.block(0, k * d, 1, d) = w(k) * ha;
    const double wkw = w.dot(st.kzz * w);
    const double hqh = (st.temporal.H * q1 * st.temporal.H.transpose())(0, 0);
    om.Hfwd.push_back(std::move(hfwd));
    om.Qfwd.push_back(MatrixXd::Constant(1, 1, wkw * hqh + c));
  }
  return om;
}

PredictedMarginal st_predict_f(const ChainPosterior& posterior,
                               const SpatioTemporalChain& st, double x,
                               const VectorXd& r) {
  const auto& z = st.chain.grid.z;
  const int m_total = st.chain.grid.size();
  if (x < z(0) || x > z(m_total - 1)) {
    throw CoverageError("spatio-temporal prediction outside the grid span");
  }
  int lo = 0, hi = m_total - 1;
  while (hi - lo > 1) {
    int mid = (lo + hi) / 2;
    if (x >= z(mid)) lo = mid; else hi = mid;
  }
  if (lo == m_total - 1) lo = m_total - 2;
  FunctionConditional fc = st_function_conditional(st, lo, x, r);
  PredictedMarginal out;
  const Gaussian& pair = posterior.pair[lo];
  out.mean = fc.W * pair.mean;
  out.cov = symmetrize(fc.W * pair.cov * fc.W.transpose() + fc.nu);
  return out;
}

}  // namespace sitegp
