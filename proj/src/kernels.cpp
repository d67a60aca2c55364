#include "sitegp/kernels.hpp"

#include <cmath>

namespace sitegp {

namespace {

void check_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ParameterError(std::string(name) + " must be positive, got " +
                         std::to_string(v));
  }
}

// Companion-form Matern with smoothness nu = p + 1/2.
LtiSde matern_sde(int p, double variance, double lengthscale) {
  check_positive(variance, "variance");
  check_positive(lengthscale, "lengthscale");
  const int d = p + 1;
  const double lambda = std::sqrt(2.0 * p + 1.0) / lengthscale;

  LtiSde sde;
  sde.d = d;
  sde.e = 1;
  sde.o = 1;
  sde.F = MatrixXd::Zero(d, d);
  for (int i = 0; i + 1 < d; ++i) sde.F(i, i + 1) = 1.0;
  // Last row: coefficients of (s + lambda)^(p+1).
  double binom = 1.0;
  for (int k = 0; k < d; ++k) {
    // binom(p+1, k) * lambda^(d-k)
    sde.F(d - 1, k) = -binom * std::pow(lambda, d - k);
    binom = binom * (d - k) / (k + 1.0);
  }
  sde.L = MatrixXd::Zero(d, 1);
  sde.L(d - 1, 0) = 1.0;
  // Spectral density q = sigma^2 * 2 sqrt(pi) Gamma(p+1) / Gamma(p+1/2) * lambda^(2p+1).
  const double q = variance * 2.0 * std::sqrt(M_PI) * std::tgamma(p + 1.0) /
                   std::tgamma(p + 0.5) * std::pow(lambda, 2 * p + 1);
  sde.Qc = MatrixXd::Constant(1, 1, q);
  sde.H = MatrixXd::Zero(1, d);
  sde.H(0, 0) = 1.0;
  sde.P0 = solve_stationary(sde.F, sde.L, sde.Qc);
  return sde;
}

LtiSde cosine_sde(double variance, double frequency) {
  check_positive(variance, "variance");
  if (frequency < 0.0 || !std::isfinite(frequency)) {
    throw ParameterError("frequency must be non-negative");
  }
  LtiSde sde;
  sde.d = 2;
  sde.e = 2;
  sde.o = 1;
  sde.F = MatrixXd::Zero(2, 2);
  sde.F(0, 1) = -frequency;
  sde.F(1, 0) = frequency;
  sde.L = MatrixXd::Identity(2, 2);
  sde.Qc = MatrixXd::Zero(2, 2);
  sde.H = MatrixXd::Zero(1, 2);
  sde.H(0, 0) = 1.0;
  // Deterministic oscillator: stationary covariance known directly; the
  // Lyapunov equation is singular here (eigenvalues on the imaginary axis).
  sde.P0 = variance * MatrixXd::Identity(2, 2);
  return sde;
}

LtiSde quasi_periodic_sde(double variance, double lengthscale,
                          double frequency) {
  check_positive(variance, "variance");
  check_positive(lengthscale, "lengthscale");
  check_positive(frequency, "frequency");
  // Kronecker product of the cosine oscillator with a Matern-1/2 decay:
  // kappa(tau) = sigma^2 exp(-|tau|/ell) cos(omega tau).
  LtiSde sde;
  sde.d = 2;
  sde.e = 2;
  sde.o = 1;
  sde.F = MatrixXd::Zero(2, 2);
  sde.F(0, 0) = -1.0 / lengthscale;
  sde.F(0, 1) = -frequency;
  sde.F(1, 0) = frequency;
  sde.F(1, 1) = -1.0 / lengthscale;
  sde.L = MatrixXd::Identity(2, 2);
  sde.Qc = (2.0 * variance / lengthscale) * MatrixXd::Identity(2, 2);
  sde.H = MatrixXd::Zero(1, 2);
  sde.H(0, 0) = 1.0;
  sde.P0 = variance * MatrixXd::Identity(2, 2);
  return sde;
}

LtiSde compose(const std::vector<KernelSpec>& parts, bool stack) {
  if (parts.empty()) throw ParameterError("composite kernel with no parts");
  std::vector<LtiSde> subs;
  subs.reserve(parts.size());
  int d = 0, e = 0, o = 0;
  for (const auto& p : parts) {
    subs.push_back(to_state_space(p));
    d += subs.back().d;
    e += subs.back().e;
    o += subs.back().o;
  }
  LtiSde sde;
  sde.d = d;
  sde.e = e;
  sde.o = stack ? o : 1;
  sde.F = MatrixXd::Zero(d, d);
  sde.L = MatrixXd::Zero(d, e);
  sde.Qc = MatrixXd::Zero(e, e);
  sde.P0 = MatrixXd::Zero(d, d);
  sde.H = MatrixXd::Zero(sde.o, d);
  int id = 0, ie = 0, io = 0;
  for (const auto& s : subs) {
    sde.F.block(id, id, s.d, s.d) = s.F;
    sde.L.block(id, ie, s.d, s.e) = s.L;
    sde.Qc.block(ie, ie, s.e, s.e) = s.Qc;
    sde.P0.block(id, id, s.d, s.d) = s.P0;
    if (stack) {
      sde.H.block(io, id, s.o, s.d) = s.H;
      io += s.o;
    } else {
      if (s.o != 1) throw ParameterError("Sum parts must be single-output");
      sde.H.block(0, id, 1, s.d) = s.H;
    }
    id += s.d;
    ie += s.e;
  }
  return sde;
}

}  // namespace

KernelSpec KernelSpec::matern12(double v, double l) {
  KernelSpec s;
  s.kind = Kind::Matern12;
  s.variance = v;
  s.lengthscale = l;
  return s;
}
KernelSpec KernelSpec::matern32(double v, double l) {
  KernelSpec s;
  s.kind = Kind::Matern32;
  s.variance = v;
  s.lengthscale = l;
  return s;
}
KernelSpec KernelSpec::matern52(double v, double l) {
  KernelSpec s;
  s.kind = Kind::Matern52;
  s.variance = v;
  s.lengthscale = l;
  return s;
}
KernelSpec KernelSpec::matern72(double v, double l) {
  KernelSpec s;
  s.kind = Kind::Matern72;
  s.variance = v;
  s.lengthscale = l;
  return s;
}
KernelSpec KernelSpec::cosine(double v, double w) {
  KernelSpec s;
  s.kind = Kind::Cosine;
  s.variance = v;
  s.frequency = w;
  return s;
}
KernelSpec KernelSpec::quasi_periodic(double v, double l, double w) {
  KernelSpec s;
  s.kind = Kind::QuasiPeriodic;
  s.variance = v;
  s.lengthscale = l;
  s.frequency = w;
  return s;
}
KernelSpec KernelSpec::sum(std::vector<KernelSpec> parts) {
  KernelSpec s;
  s.kind = Kind::Sum;
  s.parts = std::move(parts);
  return s;
}
KernelSpec KernelSpec::stack(std::vector<KernelSpec> parts) {
  KernelSpec s;
  s.kind = Kind::IndependentStack;
  s.parts = std::move(parts);
  return s;
}

int KernelSpec::outputs() const {
  if (kind != Kind::IndependentStack) return 1;
  int o = 0;
  for (const auto& p : parts) o += p.outputs();
  return o;
}

std::string KernelSpec::name() const {
  switch (kind) {
    case Kind::Matern12: return "matern12";
    case Kind::Matern32: return "matern32";
    case Kind::Matern52: return "matern52";
    case Kind::Matern72: return "matern72";
    case Kind::Cosine: return "cosine";
    case Kind::QuasiPeriodic: return "quasiperiodic";
    case Kind::Sum: return "sum";
    case Kind::IndependentStack: return "stack";
  }
  return "?";
}

LtiSde to_state_space(const KernelSpec& spec) {
  switch (spec.kind) {
    case KernelSpec::Kind::Matern12:
      return matern_sde(0, spec.variance, spec.lengthscale);
    case KernelSpec::Kind::Matern32:
      return matern_sde(1, spec.variance, spec.lengthscale);
    case KernelSpec::Kind::Matern52:
      return matern_sde(2, spec.variance, spec.lengthscale);
    case KernelSpec::Kind::Matern72:
      return matern_sde(3, spec.variance, spec.lengthscale);
    case KernelSpec::Kind::Cosine:
      return cosine_sde(spec.variance, spec.frequency);
    case KernelSpec::Kind::QuasiPeriodic:
      return quasi_periodic_sde(spec.variance, spec.lengthscale,
                                spec.frequency);
    case KernelSpec::Kind::Sum:
      return compose(spec.parts, /*stack=*/false);
    case KernelSpec::Kind::IndependentStack:
      return compose(spec.parts, /*stack=*/true);
  }
  throw ParameterError("unknown kernel kind");
}

MatrixXd solve_stationary(const MatrixXd& f, const MatrixXd& l,
                          const MatrixXd& qc) {
  return solve_lyapunov(f, l * qc * l.transpose());
}

double kernel_eval(const KernelSpec& spec, double tau) {
  const double r = std::abs(tau);
  switch (spec.kind) {
    case KernelSpec::Kind::Matern12:
      return spec.variance * std::exp(-r / spec.lengthscale);
    case KernelSpec::Kind::Matern32: {
      const double lr = std::sqrt(3.0) / spec.lengthscale * r;
      return spec.variance * (1.0 + lr) * std::exp(-lr);
    }
    case KernelSpec::Kind::Matern52: {
      const double lr = std::sqrt(5.0) / spec.lengthscale * r;
      return spec.variance * (1.0 + lr + lr * lr / 3.0) * std::exp(-lr);
    }
    case KernelSpec::Kind::Matern72: {
      const double lr = std::sqrt(7.0) / spec.lengthscale * r;
      return spec.variance *
             (1.0 + lr + 2.0 / 5.0 * lr * lr + lr * lr * lr / 15.0) *
             std::exp(-lr);
    }
    case KernelSpec::Kind::Cosine:
      return spec.variance * std::cos(spec.frequency * tau);
    case KernelSpec::Kind::QuasiPeriodic:
      return spec.variance * std::exp(-r / spec.lengthscale) *
             std::cos(spec.frequency * tau);
    case KernelSpec::Kind::Sum: {
      double v = 0.0;
      for (const auto& p : spec.parts) v += kernel_eval(p, tau);
      return v;
    }
    case KernelSpec::Kind::IndependentStack:
      throw ParameterError("kernel_eval requires a single-output kernel");
  }
  throw ParameterError("unknown kernel kind");
}

MatrixXd reconstruct_covariance(const LtiSde& sde, double tau) {
  if (tau < 0.0) throw ParameterError("reconstruct_covariance needs tau >= 0");
  return sde.H * expm(sde.F * tau) * sde.P0 * sde.H.transpose();
}

namespace {
void collect_log(const KernelSpec& s, std::vector<double>& out,
                 std::vector<std::string>& names, const std::string& prefix) {
  switch (s.kind) {
    case KernelSpec::Kind::Sum:
    case KernelSpec::Kind::IndependentStack: {
      int i = 0;
      for (const auto& p : s.parts) {
        collect_log(p, out, names, prefix + s.name() + std::to_string(i) + ".");
        ++i;
      }
      return;
    }
    case KernelSpec::Kind::Cosine:
      out.push_back(std::log(s.variance));
      names.push_back(prefix + "log_variance");
      out.push_back(std::log(s.frequency));
      names.push_back(prefix + "log_frequency");
      return;
    case KernelSpec::Kind::QuasiPeriodic:
      out.push_back(std::log(s.variance));
      names.push_back(prefix + "log_variance");
      out.push_back(std::log(s.lengthscale));
      names.push_back(prefix + "log_lengthscale");
      out.push_back(std::log(s.frequency));
      names.push_back(prefix + "log_frequency");
      return;
    default:
      out.push_back(std::log(s.variance));
      names.push_back(prefix + "log_variance");
      out.push_back(std::log(s.lengthscale));
      names.push_back(prefix + "log_lengthscale");
      return;
  }
}

void apply_log(KernelSpec& s, const VectorXd& v, int& at) {
  switch (s.kind) {
    case KernelSpec::Kind::Sum:
    case KernelSpec::Kind::IndependentStack:
      for (auto& p : s.parts) apply_log(p, v, at);
      return;
    case KernelSpec::Kind::Cosine:
      s.variance = std::exp(v(at++));
      s.frequency = std::exp(v(at++));
      return;
    case KernelSpec::Kind::QuasiPeriodic:
      s.variance = std::exp(v(at++));
      s.lengthscale = std::exp(v(at++));
      s.frequency = std::exp(v(at++));
      return;
    default:
      s.variance = std::exp(v(at++));
      s.lengthscale = std::exp(v(at++));
      return;
  }
}
}  // namespace

VectorXd hyperparameters_log(const KernelSpec& spec) {
  std::vector<double> out;
  std::vector<std::string> names;
  collect_log(spec, out, names, "");
  return Eigen::Map<VectorXd>(out.data(), static_cast<long>(out.size()));
}

std::vector<std::string> hyperparameter_names(const KernelSpec& spec) {
  std::vector<double> out;
  std::vector<std::string> names;
  collect_log(spec, out, names, "");
  return names;
}

KernelSpec with_hyperparameters_log(const KernelSpec& spec,
                                    const VectorXd& log_params) {
  KernelSpec s = spec;
  int at = 0;
  apply_log(s, log_params, at);
  if (at != log_params.size()) {
    throw ParameterError("hyperparameter vector length mismatch");
  }
  return s;
}

}  // namespace sitegp
