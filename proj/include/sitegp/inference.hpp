// Site-update rules (CVI, PEP, PL, EKS), the three training objectives
// (ELBO, PEP energy, approximate filter marginal likelihood), and the outer
// training loop with Adam on log-space hyperparameters.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sitegp/likelihoods.hpp"
#include "sitegp/sites.hpp"

namespace sitegp {

enum class Algorithm { Cvi, Pep, Pl, Eks };
enum class Objective { Elbo, PepEnergy, FilterMarglik };

std::string algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& s);
std::string objective_name(Objective o);
Objective parse_objective(const std::string& s);

// Per-datum projections onto the inducing pair, fixed for a given chain:
// q(f_n | v_m) = N(W_n v_m, nu_n), and the one-sided left conditional
// f_n | u_m used by the filter marginal likelihood.
struct ObservationModel {
  SegmentAssignment seg;
  std::vector<MatrixXd> W;      // o x 2d
  std::vector<MatrixXd> nu;     // o x o
  std::vector<MatrixXd> Hfwd;   // o x d
  std::vector<MatrixXd> Qfwd;   // o x o
  int latent_dim = 1;

  int size() const { return static_cast<int>(W.size()); }
};

// Temporal construction (spatio-temporal models build their own, see
// spatiotemporal.hpp).
ObservationModel observation_model(const MarkovChain& chain,
                                   const VectorXd& x_sorted);

// Non-owning bundle handed to updates and objectives.
struct Problem {
  const MarkovChain& chain;
  const ObservationModel& obs;
  const Likelihood& lik;
  const VectorXd& y;
  const CubatureRule& rule;
};

struct InferenceParams {
  double rho = 1.0;      // CVI step size, (0, 1]
  double alpha = 1.0;    // PEP power, (0, 1]
  double damping = 1.0;  // natural-parameter damping for PEP/PL/EKS
  bool parallel = true;  // PEP update mode
  void validate() const;
};

struct InferenceState {
  std::vector<TiedSite> sites;
  ChainPosterior posterior;
  int iteration = 0;
  int skip_count = 0;  // data skipped over all sweeps (non-PD cavities etc.)
  bool posterior_current = false;
};

InferenceState init_state(const Problem& p);
void refresh_posterior(InferenceState& state, const Problem& p);

// One natural-gradient step on every tied site; pure w.r.t. state.
std::vector<TiedSite> cvi_update(const InferenceState& state,
                                 const Problem& p, double rho);
// One PEP pass; parallel mode computes every cavity from the current
// posterior, sequential mode refreshes after each datum. skips counts data
// whose cavity (or matched posterior) was not PD this pass.
std::vector<TiedSite> pep_update(const InferenceState& state, const Problem& p,
                                 double alpha, bool parallel, double damping,
                                 int* skips);
std::vector<TiedSite> pl_update(const InferenceState& state, const Problem& p,
                                double damping, int* skips);
std::vector<TiedSite> eks_update(const InferenceState& state, const Problem& p,
                                 double damping, int* skips);

// update + refresh under one algorithm tag.
void sweep(InferenceState& state, const Problem& p, Algorithm alg,
           const InferenceParams& params);

double elbo(const InferenceState& state, const Problem& p);
double pep_energy(const InferenceState& state, const Problem& p, double alpha);
double filter_marglik(const InferenceState& state, const Problem& p);
double objective_value(const InferenceState& state, const Problem& p,
                       Objective obj, double alpha);

struct TrainConfig {
  int iterations = 500;
  double learning_rate = 0.01;  // Adam step size
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double fd_epsilon = 1e-4;     // central differences in log-space
  Objective objective = Objective::Elbo;
  Algorithm algorithm = Algorithm::Cvi;
  InferenceParams params;
  int cubature_order = 20;
  std::uint64_t seed = 0;
};

struct TraceRow {
  int iteration = 0;
  double objective = 0.0;
  VectorXd hyperparameters;  // log-space
  int skip_count = 0;
};

struct BuiltModel {
  MarkovChain chain;
  ObservationModel obs;
};
using ModelBuilder = std::function<BuiltModel(const VectorXd& log_hyper)>;

struct FitResult {
  VectorXd log_hyper;
  InferenceState state;
  BuiltModel model;
  std::vector<TraceRow> trace;
};

// Alternates one site sweep with one Adam step on the objective, gradients
// by central finite differences that re-run filter+smooth at fixed sites.
FitResult fit(const ModelBuilder& builder, VectorXd log_hyper_init,
              const VectorXd& y, const Likelihood& lik,
              const TrainConfig& cfg);

}  // namespace sitegp
