// State-space representations of stationary covariance functions. Every
// supported kernel maps to an LTI SDE (F, L, H, Qc, P0); closed-form kernel
// evaluation is kept alongside as an independent oracle for tests.
#pragma once

#include <string>
#include <vector>

#include "sitegp/linalg.hpp"

namespace sitegp {

struct LtiSde {
  MatrixXd F;   // d x d feedback
  MatrixXd L;   // d x e noise effect
  MatrixXd H;   // o x d emission
  MatrixXd Qc;  // e x e white-noise spectral density
  MatrixXd P0;  // d x d stationary state covariance
  int d = 0;
  int e = 0;
  int o = 1;
};

struct KernelSpec {
  enum class Kind {
    Matern12,
    Matern32,
    Matern52,
    Matern72,
    Cosine,
    QuasiPeriodic,  // Cosine x Matern12
    Sum,
    IndependentStack,
  };

  Kind kind = Kind::Matern32;
  double variance = 1.0;     // sigma^2
  double lengthscale = 1.0;  // ell
  double frequency = 0.0;    // omega (Cosine, QuasiPeriodic)
  std::vector<KernelSpec> parts;  // Sum / IndependentStack components

  static KernelSpec matern12(double variance, double lengthscale);
  static KernelSpec matern32(double variance, double lengthscale);
  static KernelSpec matern52(double variance, double lengthscale);
  static KernelSpec matern72(double variance, double lengthscale);
  static KernelSpec cosine(double variance, double frequency);
  static KernelSpec quasi_periodic(double variance, double lengthscale,
                                   double frequency);
  static KernelSpec sum(std::vector<KernelSpec> parts);
  static KernelSpec stack(std::vector<KernelSpec> parts);

  // Number of latent outputs (1 except for IndependentStack).
  int outputs() const;

  std::string name() const;
};

// Build the LTI-SDE form of a kernel. Throws ParameterError for
// non-positive hyperparameters.
LtiSde to_state_space(const KernelSpec& spec);

// Stationary covariance from the Lyapunov equation
// F P0 + P0 F^T + L Qc L^T = 0.
MatrixXd solve_stationary(const MatrixXd& f, const MatrixXd& l,
                          const MatrixXd& qc);

// Closed-form kernel value kappa(tau); test oracle, symmetric in tau.
// Only defined for single-output specs.
double kernel_eval(const KernelSpec& spec, double tau);

// H expm(F tau) P0 H^T for tau >= 0; equals kernel_eval for single-output
// kernels (o x o matrix in general).
MatrixXd reconstruct_covariance(const LtiSde& sde, double tau);

// Log-space hyperparameter vector of a spec (log sigma^2, log ell,
// log omega where present; depth-first over composite parts) and its
// inverse. The training loop optimizes these unconstrained.
VectorXd hyperparameters_log(const KernelSpec& spec);
KernelSpec with_hyperparameters_log(const KernelSpec& spec,
                                    const VectorXd& log_params);
std::vector<std::string> hyperparameter_names(const KernelSpec& spec);

}  // namespace sitegp
