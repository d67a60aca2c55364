// Error types thrown by the library. All derive from std::runtime_error so
// callers can catch sitegp failures uniformly or by category.
#pragma once

#include <stdexcept>
#include <string>

namespace sitegp {

// Invalid model parameter (non-positive variance, lengthscale, ...).
struct ParameterError : std::runtime_error {
  explicit ParameterError(const std::string& msg) : std::runtime_error(msg) {}
};

// Feedback matrix is not stable (Lyapunov solve impossible).
struct StabilityError : std::runtime_error {
  explicit StabilityError(const std::string& msg) : std::runtime_error(msg) {}
};

// A matrix expected to be positive definite was not, even after jitter.
struct NotPositiveDefiniteError : std::runtime_error {
  explicit NotPositiveDefiniteError(const std::string& msg)
      : std::runtime_error(msg) {}
};

// Forward filter hit a non-PD joint precision at a given step.
struct FilterDivergenceError : std::runtime_error {
  FilterDivergenceError(int step, const std::string& msg)
      : std::runtime_error("filter diverged at step " + std::to_string(step) +
                           ": " + msg),
        step(step) {}
  int step;
};

// Query input outside the segment handed to a conditional.
struct SegmentError : std::runtime_error {
  explicit SegmentError(const std::string& msg) : std::runtime_error(msg) {}
};

// Data not covered by the inducing grid.
struct CoverageError : std::runtime_error {
  explicit CoverageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Observation invalid for the likelihood (Bernoulli y not in {0,1}, ...).
struct LikelihoodDomainError : std::runtime_error {
  explicit LikelihoodDomainError(const std::string& msg)
      : std::runtime_error(msg) {}
};

// Cubature requested for a latent dimension we do not support.
struct UnsupportedDimensionError : std::runtime_error {
  explicit UnsupportedDimensionError(const std::string& msg)
      : std::runtime_error(msg) {}
};

// Malformed experiment config or data file.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Internal API misuse (e.g. stale posterior handed to an update).
struct ContractError : std::logic_error {
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace sitegp
