// Separable spatio-temporal models: the temporal SDE is tracked at a set of
// spatial inducing locations, giving a Kronecker-structured chain with state
// dimension M_z * d. Every temporal inference routine runs unchanged on the
// joint chain; only the per-datum projection differs.
#pragma once

#include "sitegp/inference.hpp"

namespace sitegp {

struct SpatialConfig {
  KernelSpec kernel;   // Matern family over R^p, Euclidean distance
  MatrixXd locations;  // M_z x p inducing locations, pairwise distinct
  double jitter = 1e-10;
};

// Gram matrix of the spatial kernel between row-sets of locations.
MatrixXd spatial_gram(const KernelSpec& kernel, const MatrixXd& a,
                      const MatrixXd& b);

struct SpatioTemporalChain {
  MarkovChain chain;           // joint chain, state dimension M_z * d
  MarkovChain temporal_chain;  // temporal discretization on the same grid
  LtiSde temporal;             // the underlying temporal SDE
  SpatialConfig spatial;
  MatrixXd kzz;                // jittered spatial Gram
  Eigen::LLT<MatrixXd> kzz_llt;
  int mz = 0;                  // spatial inducing count
};

SpatioTemporalChain build_st_chain(const KernelSpec& temporal_kernel,
                                   const SpatialConfig& spatial,
                                   const InducingGrid& z_x);

// Spatial interpolation weights and residual variance at one query location:
// B(r) = [K_{r,z} K_{zz}^{-1}] (x) H, C(r) = K_rr - K_{r,z} K_zz^{-1} K_{z,r}.
struct SpatialConditional {
  Eigen::RowVectorXd b;  // 1 x (M_z * d)
  double c = 0.0;
};
SpatialConditional spatial_conditional(const SpatioTemporalChain& st,
                                       const VectorXd& r_query);

// p(f(x, r) | v_m) on the joint chain.
FunctionConditional st_function_conditional(const SpatioTemporalChain& st,
                                            int m, double x,
                                            const VectorXd& r);

// Observation model for sorted temporal inputs with per-datum spatial rows.
ObservationModel st_observation_model(const SpatioTemporalChain& st,
                                      const VectorXd& x_sorted,
                                      const MatrixXd& r_rows);

// Posterior marginal of f at an arbitrary (x, r) query inside the grid.
PredictedMarginal st_predict_f(const ChainPosterior& posterior,
                               const SpatioTemporalChain& st, double x,
                               const VectorXd& r);

}  // namespace sitegp
