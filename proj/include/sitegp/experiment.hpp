// Experiment orchestration: model building from a config, cross-validation,
// training, prediction, and machine-readable result emission.
#pragma once

#include "sitegp/config.hpp"
#include "sitegp/metrics.hpp"
#include "sitegp/spatiotemporal.hpp"

namespace sitegp {

// Everything needed to train and predict under one hyperparameter setting.
struct ExperimentModel {
  bool spatio_temporal = false;
  ModelBuilder builder;
  VectorXd log_hyper_init;
  Likelihood likelihood;
  // Rebuilds the spatio-temporal chain for prediction at the fitted
  // hyperparameters (empty for temporal models).
  std::function<SpatioTemporalChain(const VectorXd&)> st_chain;
  KernelSpec kernel;  // temporal (or stacked) kernel at the initial setting
};

ExperimentModel make_experiment_model(const ExperimentConfig& cfg,
                                      const Dataset& train);

Dataset load_experiment_data(const ExperimentConfig& cfg);

// Contiguous-in-time blocks, fold-to-block assignment rotated by seed.
std::vector<std::vector<int>> cv_fold_indices(int n, int folds,
                                              std::uint64_t seed);

struct FoldOutcome {
  int fold = 0;
  Metrics metrics;
  std::vector<TraceRow> trace;
  // Per test point: inputs, target, predictive mean/cov of f.
  std::vector<double> test_x;
  std::vector<VectorXd> test_r;
  VectorXd test_y;
  std::vector<PredictedMarginal> predictions;
};

struct RunOutcome {
  std::vector<FoldOutcome> folds;
  std::map<std::string, double> metric_mean;
  std::map<std::string, double> metric_std;
};

// Train/predict/evaluate over every fold and write summary.json, per-fold
// trace CSVs and prediction CSVs into out_dir.
RunOutcome run_experiment(const ExperimentConfig& cfg,
                          const std::string& out_dir);

// Fit on the full dataset; writes trace.csv, predictions.csv, model.json.
void run_fit(const ExperimentConfig& cfg, const std::string& out_dir);

// Fit on config data, predict at query inputs (CSV with x[,r...] columns).
void run_predict(const ExperimentConfig& cfg, const std::string& query_csv,
                 const std::string& out_dir);

// Recompute metrics from an emitted predictions CSV; writes metrics.json.
Metrics run_evaluate(const ExperimentConfig& cfg,
                     const std::string& predictions_csv,
                     const std::string& out_dir);

// Cross-validated comparison of {cvi, pep(1), pep(0.01), pl, eks}.
void run_compare(const ExperimentConfig& cfg, const std::string& out_dir);

// Inducing-count sweep: per M, train NLML plus cross-validated NLPD/error.
void run_sweep_m(const ExperimentConfig& cfg, const std::vector<int>& ms,
                 const std::string& out_dir);

// Predictions at given inputs from a fitted model.
std::vector<PredictedMarginal> predict_points(
    const ExperimentModel& model, const FitResult& fit_result,
    const VectorXd& x, const MatrixXd& r);

}  // namespace sitegp
